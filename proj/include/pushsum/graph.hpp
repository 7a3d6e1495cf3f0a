#pragma once

// Communication graphs, the message-routing matrix P built on top of them, and
// structural diagnostics.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pushsum/types.hpp"

namespace pushsum {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple connected graph on nodes 0..n-1. Edges are stored with
/// first < second, sorted and unique.
class Graph {
public:
    /// Validates: no self-loops, no duplicate pairs, indices in range, connected.
    Graph(std::size_t n, std::vector<Edge> edges);

    std::size_t n() const noexcept { return n_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::vector<std::vector<std::size_t>>& neighbors() const noexcept { return adj_; }
    std::size_t degree(std::size_t i) const { return adj_.at(i).size(); }
    std::size_t max_degree() const;
    std::size_t min_degree() const;
    bool is_regular() const { return max_degree() == min_degree(); }

private:
    std::size_t n_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> adj_;
};

enum class GraphFormat { edge_list, adjacency };

GraphFormat parse_graph_format(const std::string& name);

/// Edge list: one "i j" pair per line, '#' starts a comment, n = max index + 1.
/// Adjacency: first line N, then N rows of N reals; nonzero entries are edges and
/// the matrix must be symmetric with a zero diagonal.
Graph load_graph(std::istream& in, GraphFormat format);
Graph load_graph_file(const std::string& path, GraphFormat format);

/// Reads the adjacency text format verbatim as a dense matrix (used for weighted
/// mixing matrices and for the --dump-x debugging format).
Matrix read_dense_matrix(std::istream& in);
void write_dense_matrix(std::ostream& out, const Matrix& m);

namespace graphs {
Graph ring(std::size_t n);
Graph complete(std::size_t n);
Graph path(std::size_t n);
Graph star(std::size_t leaves);
Graph petersen();
/// Circulant graph: i ~ i +- s (mod n) for every offset s. Vertex-transitive.
Graph circulant(std::size_t n, const std::vector<std::size_t>& offsets);
} // namespace graphs

enum class MixingMode {
    uniform_c,              // p_ij = c on edges, c * max degree <= 1
    row_stochastic_regular, // regular graph, c = 1 / degree
    weighted,               // arbitrary symmetric nonnegative entries; only valid with beta = 0
};

std::string to_string(MixingMode mode);
MixingMode parse_mixing_mode(const std::string& name);

/// Symmetric message-routing matrix P with zero diagonal and row sums <= 1.
struct MixingMatrix {
    Matrix entries;
    double c = 0.0;          // common edge weight; 0 in weighted mode
    MixingMode mode = MixingMode::uniform_c;

    std::size_t n() const noexcept { return static_cast<std::size_t>(entries.rows()); }
    /// True when every entry is 0 or c, which the beta != 0 rate bound needs.
    bool two_valued() const noexcept { return mode != MixingMode::weighted; }
    bool row_stochastic() const;
};

/// `c` is only read in uniform_c mode; it defaults to 1 / max degree.
MixingMatrix build_mixing_matrix(const Graph& g, MixingMode mode, std::optional<double> c = std::nullopt);

/// Wraps a caller-supplied dense P after checking symmetry, nonnegativity,
/// zero diagonal and row sums <= 1. The result is in weighted mode unless all
/// nonzero entries coincide, in which case it is tagged uniform_c.
MixingMatrix mixing_from_weights(const Matrix& p);

/// Descending eigenvalues and matching orthonormal eigenvectors (columns).
struct Spectrum {
    Vector values;
    Matrix vectors;
    std::size_t n() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// Cyclic Jacobi eigendecomposition. Rejects inputs whose asymmetry exceeds
/// 1e-12 relative to the largest entry.
Spectrum symmetric_eigen(const Matrix& p);
inline Spectrum symmetric_eigen(const MixingMatrix& p) { return symmetric_eigen(p.entries); }

struct HomogeneityReport {
    bool regular = false;
    std::size_t min_degree = 0;
    std::size_t max_degree = 0;
    /// max_i |diag(Phi*(I - J))_i - mean diag| for the probe model.
    double diagonal_deviation = 0.0;
    /// deviation > 1e-10: the eigenvalue recursion is only approximate here.
    bool recursion_approximate = false;
};

/// Degree regularity plus a one-step Phi* probe from X0 = I - J. The probe uses
/// the graph's natural mixing matrix (row-stochastic when regular, else uniform
/// c = 1/max degree) and a fixed realizable broadcast-style parameter set.
HomogeneityReport check_homogeneity(const Graph& g);

} // namespace pushsum
