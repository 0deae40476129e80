#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stethofed/labels.hpp"

namespace stethofed {

// N embedding vectors of width dim with their device and disease labels.
struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<double> data;  // row-major N x dim
  std::vector<std::string> device;
  std::vector<RespClass> disease;

  std::size_t size() const noexcept { return device.size(); }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  // Throws ShapeMismatch / TooFewPoints on violated invariants.
  void validate() const;
};

// Subtracts each device's mean from its members.
EmbeddingSet mean_subtract(const EmbeddingSet& e);

// Background variant: the per-device mean is estimated from normal-labeled
// members only, falling back to all members when a device has none.
EmbeddingSet background_mean_subtract(const EmbeddingSet& e);

struct PrincipalDirections {
  std::vector<std::vector<double>> vectors;  // unit-norm, mutually orthogonal
  std::vector<double> eigenvalues;           // descending
};

// Top-r eigenpairs of a symmetric dim x dim matrix by power iteration with
// deflation (tolerance 1e-10, at most 10^4 iterations per direction).
PrincipalDirections top_eigenpairs(std::vector<double> sym, std::size_t dim, std::size_t r);

// Population covariance of the set about its global mean.
std::vector<double> covariance(const EmbeddingSet& e);

// Removes the projections onto the top-r principal directions of the
// centered set, then restores the global mean. Requires 1 <= r < dim.
EmbeddingSet lowrank_whiten(const EmbeddingSet& e, std::size_t r);

// Leave-one-out k-nearest-neighbour accuracy (percent), Euclidean distance.
// Majority vote; ties go to the label with the smallest summed distance.
double knn_accuracy(const EmbeddingSet& e, std::span<const int> labels, std::size_t k = 50);

std::vector<int> device_labels(const EmbeddingSet& e);
std::vector<int> disease_labels(const EmbeddingSet& e);

// Tab-separated: dim value columns, then device, then disease.
void write_embeddings_tsv(std::ostream& out, const EmbeddingSet& e);
EmbeddingSet read_embeddings_tsv(std::istream& in);

}  // namespace stethofed
