#include "stethofed/probe.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stethofed/error.hpp"
#include "stethofed/rng.hpp"

namespace stethofed {

void EmbeddingSet::validate() const {
  if (dim == 0) raise(ErrorKind::ShapeMismatch, "embedding width must be positive");
  if (data.size() != device.size() * dim || disease.size() != device.size()) {
    raise(ErrorKind::ShapeMismatch, "embedding arrays disagree in length");
  }
  if (size() < 2) raise(ErrorKind::TooFewPoints, "embedding sets need at least two points");
}

namespace {

EmbeddingSet subtract_group_means(const EmbeddingSet& e, bool background) {
  e.validate();
  struct Acc {
    std::vector<double> all, normal;
    std::size_t n_all = 0, n_normal = 0;
  };
  std::map<std::string, Acc> groups;
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto& g = groups[e.device[i]];
    if (g.all.empty()) {
      g.all.assign(e.dim, 0.0);
      g.normal.assign(e.dim, 0.0);
    }
    auto r = e.row(i);
    for (std::size_t d = 0; d < e.dim; ++d) g.all[d] += r[d];
    ++g.n_all;
    if (e.disease[i] == RespClass::Normal) {
      for (std::size_t d = 0; d < e.dim; ++d) g.normal[d] += r[d];
      ++g.n_normal;
    }
  }
  std::map<std::string, std::vector<double>> means;
  for (auto& [dev, g] : groups) {
    if (g.n_all == 0) raise(ErrorKind::EmptyGroup, "device " + dev + " has no members");
    const bool use_normal = background && g.n_normal > 0;
    auto& src = use_normal ? g.normal : g.all;
    const double n = static_cast<double>(use_normal ? g.n_normal : g.n_all);
    for (double& v : src) v /= n;
    means[dev] = src;
  }
  EmbeddingSet out = e;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& m = means[out.device[i]];
    auto r = out.row(i);
    for (std::size_t d = 0; d < out.dim; ++d) r[d] -= m[d];
  }
  return out;
}

std::vector<double> global_mean(const EmbeddingSet& e) {
  std::vector<double> mean(e.dim, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto r = e.row(i);
    for (std::size_t d = 0; d < e.dim; ++d) mean[d] += r[d];
  }
  for (double& v : mean) v /= static_cast<double>(e.size());
  return mean;
}

}  // namespace

EmbeddingSet mean_subtract(const EmbeddingSet& e) { return subtract_group_means(e, false); }

EmbeddingSet background_mean_subtract(const EmbeddingSet& e) {
  return subtract_group_means(e, true);
}

std::vector<double> covariance(const EmbeddingSet& e) {
  e.validate();
  const auto mean = global_mean(e);
  const auto D = e.dim;
  std::vector<double> cov(D * D, 0.0);
  std::vector<double> c(D);
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto r = e.row(i);
    for (std::size_t d = 0; d < D; ++d) c[d] = r[d] - mean[d];
    for (std::size_t a = 0; a < D; ++a) {
      for (std::size_t b = a; b < D; ++b) cov[a * D + b] += c[a] * c[b];
    }
  }
  const double n = static_cast<double>(e.size());
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b = a; b < D; ++b) {
      cov[a * D + b] /= n;
      cov[b * D + a] = cov[a * D + b];
    }
  }
  return cov;
}

PrincipalDirections top_eigenpairs(std::vector<double> sym, std::size_t dim, std::size_t r) {
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 10'000;
  PrincipalDirections out;
  RngStream init(0x9e1f);
  std::vector<double> v(dim), w(dim);

  auto orthogonalize = [&](std::vector<double>& x) {
    for (const auto& u : out.vectors) {
      const double p = std::inner_product(x.begin(), x.end(), u.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) x[i] -= p * u[i];
    }
  };
  auto normalize = [&](std::vector<double>& x) {
    const double n = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    if (n > 0.0) {
      for (double& xi : x) xi /= n;
    }
    return n;
  };

  for (std::size_t k = 0; k < r; ++k) {
    for (double& vi : v) vi = init.normal();
    orthogonalize(v);
    normalize(v);
    double lambda = 0.0;
    for (int it = 0; it < kMaxIter; ++it) {
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += sym[a * dim + b] * v[b];
        w[a] = s;
      }
      orthogonalize(w);
      lambda = normalize(w);
      if (lambda == 0.0) break;
      // Align sign before measuring the change.
      const double s = std::inner_product(w.begin(), w.end(), v.begin(), 0.0) < 0.0 ? -1.0 : 1.0;
      double diff = 0.0;
      for (std::size_t i = 0; i < dim; ++i) diff = std::max(diff, std::abs(s * w[i] - v[i]));
      for (std::size_t i = 0; i < dim; ++i) v[i] = s * w[i];
      if (diff < kTol) break;
    }
    // lambda == 0 leaves v untouched: it is already a unit vector orthogonal
    // to the previous directions, hence an eigenvector of the null remainder.
    // Rayleigh quotient on the deflated matrix.
    double rq = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < dim; ++b) s += sym[a * dim + b] * v[b];
      rq += v[a] * s;
    }
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) sym[a * dim + b] -= rq * v[a] * v[b];
    }
    out.vectors.push_back(v);
    out.eigenvalues.push_back(rq);
  }
  return out;
}

EmbeddingSet lowrank_whiten(const EmbeddingSet& e, std::size_t r) {
  e.validate();
  if (r < 1 || r >= e.dim) {
    raise(ErrorKind::BadRank, "whitening rank " + std::to_string(r) + " outside [1, " +
                                  std::to_string(e.dim) + ")");
  }
  const auto mean = global_mean(e);
  const auto dirs = top_eigenpairs(covariance(e), e.dim, r);
  EmbeddingSet out = e;
  std::vector<double> c(e.dim);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = out.row(i);
    for (std::size_t d = 0; d < e.dim; ++d) c[d] = row[d] - mean[d];
    for (const auto& u : dirs.vectors) {
      const double p = std::inner_product(c.begin(), c.end(), u.begin(), 0.0);
      for (std::size_t d = 0; d < e.dim; ++d) c[d] -= p * u[d];
    }
    for (std::size_t d = 0; d < e.dim; ++d) row[d] = mean[d] + c[d];
  }
  return out;
}

double knn_accuracy(const EmbeddingSet& e, std::span<const int> labels, std::size_t k) {
  e.validate();
  if (labels.size() != e.size()) raise(ErrorKind::ShapeMismatch, "label count mismatch");
  if (k == 0) raise(ErrorKind::BadRange, "k must be positive");
  const std::size_t n = e.size();
  if (n <= k) {
    raise(ErrorKind::TooFewPoints,
          "kNN with k=" + std::to_string(k) + " needs more than " + std::to_string(k) + " points");
  }
  std::size_t correct = 0;
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  std::map<int, std::pair<std::size_t, double>> votes;
  for (std::size_t i = 0; i < n; ++i) {
    auto a = e.row(i);
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto b = e.row(j);
      double s = 0.0;
      for (std::size_t d = 0; d < e.dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
      }
      dist[m++] = {s, j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
    votes.clear();
    for (std::size_t q = 0; q < k; ++q) {
      auto& v = votes[labels[dist[q].second]];
      v.first += 1;
      v.second += std::sqrt(dist[q].first);
    }
    int best = 0;
    std::size_t best_count = 0;
    double best_dist = 0.0;
    for (const auto& [label, v] : votes) {
      if (v.first > best_count || (v.first == best_count && v.second < best_dist)) {
        best = label;
        best_count = v.first;
        best_dist = v.second;
      }
    }
    if (best == labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<int> device_labels(const EmbeddingSet& e) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(e.size());
  for (const auto& d : e.device) {
    auto [it, _] = ids.try_emplace(d, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

std::vector<int> disease_labels(const EmbeddingSet& e) {
  std::vector<int> out;
  out.reserve(e.size());
  for (auto c : e.disease) out.push_back(static_cast<int>(c));
  return out;
}

void write_embeddings_tsv(std::ostream& out, const EmbeddingSet& e) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (double v : e.row(i)) out << v << '\t';
    out << e.device[i] << '\t' << class_name(e.disease[i]) << '\n';
  }
}

EmbeddingSet read_embeddings_tsv(std::istream& in) {
  EmbeddingSet e;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 3) raise(ErrorKind::Format, "embedding line needs values and two labels");
    const std::size_t dim = cols.size() - 2;
    if (e.dim == 0) e.dim = dim;
    if (dim != e.dim) raise(ErrorKind::Format, "embedding lines differ in width");
    for (std::size_t d = 0; d < dim; ++d) e.data.push_back(std::stod(cols[d]));
    e.device.push_back(cols[dim]);
    const auto cls = parse_class(cols[dim + 1]);
    if (!cls) raise(ErrorKind::Format, "unknown disease label '" + cols[dim + 1] + "'");
    e.disease.push_back(*cls);
  }
  return e;
}

}  // namespace stethofed
