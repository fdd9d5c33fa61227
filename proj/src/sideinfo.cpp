#include "cfrec/sideinfo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace cfrec {

namespace {

// Cyclic Jacobi eigendecomposition of a small symmetric matrix, used to
// polish the subspace found by power iteration. Eigenvalues descending.
void jacobi_eigen_symmetric(Eigen::MatrixXd s, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index n = s.rows();
  vectors = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off <= 1e-30 * std::max(1.0, s.diagonal().cwiseAbs().maxCoeff())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (s(p, q) == 0.0) continue;
        double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double snum = t * c;
        Eigen::VectorXd sp = s.col(p), sq = s.col(q);
        s.col(p) = c * sp - snum * sq;
        s.col(q) = snum * sp + c * sq;
        sp = s.row(p);
        sq = s.row(q);
        s.row(p) = c * sp.transpose() - snum * sq.transpose();
        s.row(q) = snum * sp.transpose() + c * sq.transpose();
        Eigen::VectorXd vp = vectors.col(p), vq = vectors.col(q);
        vectors.col(p) = c * vp - snum * vq;
        vectors.col(q) = snum * vp + c * vq;
      }
    }
  }
  values = s.diagonal();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  Eigen::VectorXd sorted_vals(n);
  Eigen::MatrixXd sorted_vecs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted_vals[i] = values[order[static_cast<std::size_t>(i)]];
    sorted_vecs.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  values = std::move(sorted_vals);
  vectors = std::move(sorted_vecs);
}

}  // namespace

EigenResult top_eigenpairs(
    std::size_t n, std::size_t k,
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    std::uint64_t seed, double tol, std::size_t max_iterations) {
  EigenResult res;
  res.vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  res.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  if (n == 0 || k == 0) return res;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
  Eigen::VectorXd candidate(static_cast<Eigen::Index>(n));
  double top_value = 0.0;
  std::size_t found = 0;

  for (std::size_t l = 0; l < k; ++l) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);

    double value = 0.0;
    bool converged = false;
    bool annihilated = false;
    for (std::size_t it = 0; it < max_iterations; ++it) {
      // Project out converged directions, twice for numerical orthogonality.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t m = 0; m < found; ++m) {
          const auto p = res.vectors.col(static_cast<Eigen::Index>(m));
          v.noalias() -= p * p.dot(v);
        }
      }
      double norm = v.norm();
      if (norm < 1e-300) {  // landed in the null space of the deflated operator
        annihilated = true;
        break;
      }
      v /= norm;
      candidate = v;
      apply(v, w);
      value = v.dot(w);
      if ((w - value * v).norm() <= tol * std::max({top_value, value, 1.0})) {
        converged = true;
        break;
      }
      v = w;
    }
    if (l == 0) top_value = std::max(value, 0.0);

    // A numerically zero eigenvalue means the rest of the spectrum is flat.
    if (annihilated || !(value > tol * std::max(top_value, 1.0))) break;
    if (!converged) {
      warn("power iteration hit the iteration cap at eigenpair " + std::to_string(l + 1) +
           "; keeping the current Rayleigh estimate");
    }
    res.vectors.col(static_cast<Eigen::Index>(l)) = candidate;
    res.values[static_cast<Eigen::Index>(l)] = value;
    found = l + 1;
  }
  res.rank = found;

  if (found > 0) {
    // Rayleigh-Ritz polish on the captured subspace: resolves mixing between
    // nearby eigenvalues that plain deflation converges to slowly.
    Eigen::MatrixXd basis = res.vectors.leftCols(static_cast<Eigen::Index>(found));
    Eigen::MatrixXd image(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(found));
    for (std::size_t m = 0; m < found; ++m) {
      apply(basis.col(static_cast<Eigen::Index>(m)), w);
      image.col(static_cast<Eigen::Index>(m)) = w;
    }
    Eigen::MatrixXd projected = basis.transpose() * image;
    projected = 0.5 * (projected + projected.transpose().eval());
    Eigen::VectorXd ritz_values;
    Eigen::MatrixXd ritz_vectors;
    jacobi_eigen_symmetric(projected, ritz_values, ritz_vectors);
    res.vectors.leftCols(static_cast<Eigen::Index>(found)) = basis * ritz_vectors;
    res.values.head(static_cast<Eigen::Index>(found)) = ritz_values.cwiseMax(0.0);
  }

  // Sign convention: the largest-magnitude component of each vector is positive.
  for (std::size_t l = 0; l < res.rank; ++l) {
    auto col = res.vectors.col(static_cast<Eigen::Index>(l));
    Eigen::Index argmax = 0;
    col.cwiseAbs().maxCoeff(&argmax);
    if (col[argmax] < 0.0) res.vectors.col(static_cast<Eigen::Index>(l)) = -col;
  }
  return res;
}

namespace {

// y = T * x over the sparse count rows.
void tag_matvec(const TagMatrix& tags, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  y.setZero();
  for (std::size_t i = 0; i < tags.rows.size(); ++i) {
    double acc = 0.0;
    for (const auto& [tag, count] : tags.rows[i]) acc += static_cast<double>(count) * x[tag];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
}

// y = T' * x.
void tag_matvec_transposed(const TagMatrix& tags, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  y.setZero();
  for (std::size_t i = 0; i < tags.rows.size(); ++i) {
    double xi = x[static_cast<Eigen::Index>(i)];
    if (xi == 0.0) continue;
    for (const auto& [tag, count] : tags.rows[i]) y[tag] += static_cast<double>(count) * xi;
  }
}

}  // namespace

SideFeatures pca_compress(const TagMatrix& tags, std::size_t components) {
  const std::size_t n_items = tags.n_entities;
  const std::size_t n_tags = tags.n_tags();
  if (components < 1) throw Error::usage("pca components must be at least 1");
  if (n_items == 0) throw Error::data("pca on an empty tag matrix");
  if (components > std::min(n_items, std::max<std::size_t>(n_tags, 1))) {
    throw Error::usage("pca components exceed min(n_items, n_tags)");
  }

  // Iterate on the smaller Gram operator; both yield the same nonzero
  // spectrum of T*T'. The Gram matrix is never materialized.
  const bool tag_side = n_tags < n_items;
  const std::size_t op_dim = tag_side ? n_tags : n_items;
  Eigen::VectorXd tmp(static_cast<Eigen::Index>(tag_side ? n_items : std::max<std::size_t>(n_tags, 1)));
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    if (tag_side) {
      tag_matvec(tags, x, tmp);                // tmp = T x   (items)
      tag_matvec_transposed(tags, tmp, y);     // y = T' tmp  (tags)
    } else {
      tag_matvec_transposed(tags, x, tmp);     // tmp = T' x  (tags)
      tag_matvec(tags, tmp, y);                // y = T tmp   (items)
    }
  };

  EigenResult eig = top_eigenpairs(op_dim, components, apply);
  if (eig.rank < components) {
    warn("tag matrix rank " + std::to_string(eig.rank) + " below requested " +
         std::to_string(components) + " components; padding with zero columns");
  }

  SideFeatures out;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_items),
                                     static_cast<Eigen::Index>(components));
  Eigen::VectorXd item_vec(static_cast<Eigen::Index>(n_items));
  for (std::size_t l = 0; l < eig.rank; ++l) {
    const double lambda = eig.values[static_cast<Eigen::Index>(l)];
    if (tag_side) {
      // Left singular direction scaled by sqrt(lambda): T q has norm sqrt(lambda)
      // exactly when q is a unit eigenvector of T'T.
      tag_matvec(tags, eig.vectors.col(static_cast<Eigen::Index>(l)), item_vec);
      out.values.col(static_cast<Eigen::Index>(l)) = item_vec;
    } else {
      out.values.col(static_cast<Eigen::Index>(l)) =
          eig.vectors.col(static_cast<Eigen::Index>(l)) * std::sqrt(lambda);
    }
    // Re-apply the sign convention on the item-side vector.
    auto col = out.values.col(static_cast<Eigen::Index>(l));
    Eigen::Index argmax = 0;
    col.cwiseAbs().maxCoeff(&argmax);
    if (col[argmax] < 0.0) out.values.col(static_cast<Eigen::Index>(l)) = -col;
  }
  out.provenance.push_back({"pca-tags", components});
  return out;
}

SideFeatures from_categories(const CategoryMatrix& categories, const std::string& name) {
  SideFeatures out;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(categories.n_entities),
                                     static_cast<Eigen::Index>(categories.n_categories()));
  for (std::size_t i = 0; i < categories.rows.size(); ++i) {
    for (std::uint32_t c : categories.rows[i]) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
    }
  }
  out.provenance.push_back({name, categories.n_categories()});
  return out;
}

SideFeatures encode_demographics(const Demographics& demo) {
  std::vector<SideFeatures> blocks;
  blocks.push_back(from_categories(demo.gender, "gender"));

  SideFeatures age;
  age.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(demo.n_users), 1);
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < demo.n_users; ++i) {
    if (!demo.age_known[i]) continue;
    if (!any) {
      lo = hi = demo.age[i];
      any = true;
    } else {
      lo = std::min(lo, demo.age[i]);
      hi = std::max(hi, demo.age[i]);
    }
  }
  if (any && hi > lo) {
    for (std::size_t i = 0; i < demo.n_users; ++i) {
      if (demo.age_known[i]) {
        age.values(static_cast<Eigen::Index>(i), 0) = (demo.age[i] - lo) / (hi - lo);
      }
    }
  }
  age.provenance.push_back({"age", 1});
  blocks.push_back(std::move(age));

  blocks.push_back(from_categories(demo.occupation, "occupation"));
  return assemble(blocks);
}

SideFeatures assemble(const std::vector<SideFeatures>& blocks) {
  if (blocks.empty()) throw Error::usage("assemble requires at least one feature block");
  const std::size_t n = blocks.front().n_entities();
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.n_entities() != n) {
      std::ostringstream os;
      os << "feature block '" << (b.provenance.empty() ? "?" : b.provenance.front().name)
         << "' has " << b.n_entities() << " entities, expected " << n << " (block '"
         << (blocks.front().provenance.empty() ? "?" : blocks.front().provenance.front().name)
         << "')";
      throw Error::data(os.str());
    }
    total += b.dim();
  }

  SideFeatures out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(total));
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    out.values.middleCols(offset, static_cast<Eigen::Index>(b.dim())) = b.values;
    offset += static_cast<Eigen::Index>(b.dim());
    out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  }
  return out;
}

void write_side_features(const std::string& path, const SideFeatures& features) {
  std::ofstream outf(path);
  if (!outf) throw Error::data("cannot write " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < features.values.rows(); ++i) {
    outf << i << '\t';
    for (Eigen::Index j = 0; j < features.values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", features.values(i, j));
      outf << (j ? "," : "") << buf;
    }
    outf << '\n';
  }
  if (!outf) throw Error::data("failed writing " + path);
}

SideFeatures read_side_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error::data(path + ":" + std::to_string(line_no) + ": expected `index<TAB>values`");
    }
    std::vector<double> vals;
    std::stringstream ss(line.substr(tab + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (rows.empty()) {
      dim = vals.size();
    } else if (vals.size() != dim) {
      throw Error::data(path + ":" + std::to_string(line_no) + ": inconsistent feature dimension");
    }
    rows.push_back(std::move(vals));
  }
  SideFeatures out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  out.provenance.push_back({"file:" + path, dim});
  return out;
}

}  // namespace cfrec
