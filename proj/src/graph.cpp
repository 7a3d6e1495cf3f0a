#include "pushsum/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pushsum/phi.hpp"

namespace pushsum {

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_(n), adj_(n) {
    if (n == 0) throw GraphError("graph must have at least one node");
    for (auto& [a, b] : edges) {
        if (a >= n || b >= n) throw GraphError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
        if (a == b) throw GraphError("self-loop at node " + std::to_string(a));
        if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end())
        throw GraphError("duplicate edge (" + std::to_string(dup->first) + "," + std::to_string(dup->second) + ")");
    edges_ = std::move(edges);
    for (const auto& [a, b] : edges_) {
        adj_[a].push_back(b);
        adj_[b].push_back(a);
    }
    for (auto& list : adj_) std::sort(list.begin(), list.end());

    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto w : adj_[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++reached;
                stack.push_back(w);
            }
        }
    }
    if (reached != n)
        throw GraphError("graph is disconnected (" + std::to_string(reached) + " of " + std::to_string(n) +
                         " nodes reachable from node 0)");
}

std::size_t Graph::max_degree() const {
    std::size_t d = 0;
    for (const auto& l : adj_) d = std::max(d, l.size());
    return d;
}

std::size_t Graph::min_degree() const {
    std::size_t d = adj_.front().size();
    for (const auto& l : adj_) d = std::min(d, l.size());
    return d;
}

GraphFormat parse_graph_format(const std::string& name) {
    if (name == "edge-list" || name == "edgelist") return GraphFormat::edge_list;
    if (name == "adjacency") return GraphFormat::adjacency;
    throw ParseError("unknown graph format '" + name + "'", 0);
}

namespace {

std::string strip_comment(const std::string& line) {
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

Graph load_edge_list(std::istream& in) {
    std::vector<Edge> edges;
    std::size_t n = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto body = strip_comment(line);
        if (blank(body)) continue;
        std::istringstream ss(body);
        long long a = -1, b = -1;
        std::string extra;
        if (!(ss >> a >> b)) throw ParseError("expected two node indices", lineno);
        if (ss >> extra) throw ParseError("unexpected token '" + extra + "'", lineno);
        if (a < 0 || b < 0) throw ParseError("negative node index", lineno);
        if (a == b) throw GraphError("self-loop at node " + std::to_string(a) + " (line " + std::to_string(lineno) + ")");
        edges.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(a, b)) + 1);
    }
    if (edges.empty()) throw ParseError("edge list contains no edges", lineno);
    return Graph(n, std::move(edges));
}

} // namespace

Matrix read_dense_matrix(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    long long n = -1;
    while (n < 0 && std::getline(in, line)) {
        ++lineno;
        auto body = strip_comment(line);
        if (blank(body)) continue;
        std::istringstream ss(body);
        if (!(ss >> n) || n <= 0) throw ParseError("expected positive matrix size N", lineno);
    }
    if (n < 0) throw ParseError("missing matrix size line", lineno);
    Matrix m(n, n);
    long long row = 0;
    while (row < n && std::getline(in, line)) {
        ++lineno;
        auto body = strip_comment(line);
        if (blank(body)) continue;
        std::istringstream ss(body);
        for (long long col = 0; col < n; ++col) {
            double v;
            if (!(ss >> v)) throw ParseError("row " + std::to_string(row) + " has fewer than N entries", lineno);
            if (!std::isfinite(v)) throw ParseError("non-finite entry", lineno);
            m(row, col) = v;
        }
        std::string extra;
        if (ss >> extra) throw ParseError("row " + std::to_string(row) + " has more than N entries", lineno);
        ++row;
    }
    if (row < n) throw ParseError("expected " + std::to_string(n) + " rows, got " + std::to_string(row), lineno);
    return m;
}

void write_dense_matrix(std::ostream& out, const Matrix& m) {
    auto old = out.precision(17);
    out << m.rows() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
        out << '\n';
    }
    out.precision(old);
}

Graph load_graph(std::istream& in, GraphFormat format) {
    if (format == GraphFormat::edge_list) return load_edge_list(in);
    Matrix m = read_dense_matrix(in);
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        if (m(i, i) != 0.0) throw GraphError("self-loop at node " + std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            if ((m(i, j) != 0.0) != (m(j, i) != 0.0))
                throw GraphError("adjacency matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            if (m(i, j) != 0.0) edges.emplace_back(i, j);
        }
    }
    return Graph(n, std::move(edges));
}

Graph load_graph_file(const std::string& path, GraphFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open graph file '" + path + "'");
    return load_graph(in, format);
}

namespace graphs {

Graph ring(std::size_t n) {
    if (n < 3) throw GraphError("ring needs at least 3 nodes");
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
    return Graph(n, std::move(e));
}

Graph complete(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return Graph(n, std::move(e));
}

Graph path(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return Graph(n, std::move(e));
}

Graph star(std::size_t leaves) {
    std::vector<Edge> e;
    for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, i);
    return Graph(leaves + 1, std::move(e));
}

Graph petersen() {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < 5; ++i) {
        e.emplace_back(i, (i + 1) % 5);         // outer cycle
        e.emplace_back(i, i + 5);               // spokes
        e.emplace_back(5 + i, 5 + (i + 2) % 5); // inner pentagram
    }
    return Graph(10, std::move(e));
}

Graph circulant(std::size_t n, const std::vector<std::size_t>& offsets) {
    std::vector<Edge> e;
    for (auto s : offsets) {
        if (s == 0 || s > n / 2) throw GraphError("circulant offset out of range");
        for (std::size_t i = 0; i < n; ++i) {
            Edge edge{i, (i + s) % n};
            if (edge.first > edge.second) std::swap(edge.first, edge.second);
            e.push_back(edge);
        }
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return Graph(n, std::move(e));
}

} // namespace graphs

std::string to_string(MixingMode mode) {
    switch (mode) {
    case MixingMode::uniform_c: return "uniform-c";
    case MixingMode::row_stochastic_regular: return "row-stochastic";
    case MixingMode::weighted: return "weighted";
    }
    return "?";
}

MixingMode parse_mixing_mode(const std::string& name) {
    if (name == "uniform-c" || name == "uniform") return MixingMode::uniform_c;
    if (name == "row-stochastic" || name == "row-stochastic-regular") return MixingMode::row_stochastic_regular;
    if (name == "weighted") return MixingMode::weighted;
    throw ParseError("unknown mixing mode '" + name + "'", 0);
}

bool MixingMatrix::row_stochastic() const {
    return ((entries.rowwise().sum().array() - 1.0).abs() <= 1e-12).all();
}

MixingMatrix build_mixing_matrix(const Graph& g, MixingMode mode, std::optional<double> c) {
    MixingMatrix out;
    out.mode = mode;
    switch (mode) {
    case MixingMode::row_stochastic_regular:
        if (!g.is_regular())
            throw GraphError("row-stochastic mode needs a regular graph (degrees range " + std::to_string(g.min_degree()) +
                             ".." + std::to_string(g.max_degree()) + ")");
        out.c = 1.0 / static_cast<double>(g.max_degree());
        break;
    case MixingMode::uniform_c:
        out.c = c.value_or(1.0 / static_cast<double>(g.max_degree()));
        if (!(out.c > 0.0 && out.c <= 1.0)) throw GraphError("c must lie in (0, 1]");
        if (out.c * static_cast<double>(g.max_degree()) > 1.0 + 1e-12)
            throw GraphError("c * max degree exceeds 1");
        break;
    case MixingMode::weighted:
        throw GraphError("weighted mixing matrices are built with mixing_from_weights");
    }
    out.entries = Matrix::Zero(g.n(), g.n());
    for (const auto& [a, b] : g.edges()) out.entries(a, b) = out.entries(b, a) = out.c;
    return out;
}

MixingMatrix mixing_from_weights(const Matrix& p) {
    if (p.rows() != p.cols() || p.rows() == 0) throw GraphError("mixing matrix must be square and non-empty");
    const auto n = p.rows();
    double common = 0.0;
    bool uniform = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (p(i, i) != 0.0) throw GraphError("mixing matrix needs a zero diagonal");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (p(i, j) < 0.0) throw GraphError("mixing matrix entries must be nonnegative");
            if (std::abs(p(i, j) - p(j, i)) > 1e-12) throw GraphError("mixing matrix must be symmetric");
            if (p(i, j) > 0.0) {
                if (common == 0.0) common = p(i, j);
                else if (p(i, j) != common) uniform = false;
            }
        }
        if (p.row(i).sum() > 1.0 + 1e-12) throw GraphError("mixing matrix row sum exceeds 1");
    }
    MixingMatrix out;
    out.entries = p;
    if (uniform && common > 0.0) {
        out.mode = MixingMode::uniform_c;
        out.c = common;
    } else {
        out.mode = MixingMode::weighted;
        out.c = 0.0;
    }
    return out;
}

HomogeneityReport check_homogeneity(const Graph& g) {
    HomogeneityReport rep;
    rep.min_degree = g.min_degree();
    rep.max_degree = g.max_degree();
    rep.regular = g.is_regular();

    const auto mix = build_mixing_matrix(g, rep.regular ? MixingMode::row_stochastic_regular : MixingMode::uniform_c);
    // Broadcast-like moments with w = c/2 and activation 1/2.
    const double q = 0.5, w = mix.c / 2.0;
    CorrelationParams params;
    params.q = q;
    params.u = (w / mix.c) * (w / mix.c);
    params.alpha = params.u;
    params.beta = w * w / (q * mix.c * mix.c);
    params.r = std::sqrt(w * w / (q * mix.c));
    const auto model = make_phi_model(mix, params);

    const auto n = static_cast<double>(g.n());
    const Matrix x0 = Matrix::Identity(g.n(), g.n()) - Matrix::Constant(g.n(), g.n(), 1.0 / n);
    const Vector d = phi_star(model, x0).diagonal();
    rep.diagonal_deviation = (d.array() - d.mean()).abs().maxCoeff();
    rep.recursion_approximate = rep.diagonal_deviation > 1e-10;
    return rep;
}

} // namespace pushsum
