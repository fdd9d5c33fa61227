#include "cfrec/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cfrec {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'R', 'E', 'C', 'K', 'P', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

double get_f64(std::istream& in) {
  std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

template <typename Matrix>
void put_matrix(std::ostream& out, const Matrix& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

template <typename Matrix>
void get_matrix(std::istream& in, Matrix& m) {
  const auto rows = static_cast<Eigen::Index>(get_u64(in));
  const auto cols = static_cast<Eigen::Index>(get_u64(in));
  m.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_f64(in);
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

void get_vector(std::istream& in, Eigen::VectorXd& v) {
  v.resize(static_cast<Eigen::Index>(get_u64(in)));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f64(in);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error::data("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, static_cast<std::uint64_t>(ckpt.kind));
  put_u64(out, static_cast<std::uint64_t>(ckpt.orientation));
  put_f64(out, ckpt.scale.min_rating);
  put_f64(out, ckpt.scale.max_rating);
  put_u64(out, ckpt.train_seed);
  put_u64(out, ckpt.epochs_trained);

  put_f64(out, ckpt.bias.global_mean);
  put_u64(out, ckpt.bias.row_means.size());
  for (double v : ckpt.bias.row_means) put_f64(out, v);
  for (std::uint32_t c : ckpt.bias.row_counts) put_u64(out, c);

  if (ckpt.kind == Checkpoint::Kind::kAutoencoder) {
    if (!ckpt.autoencoder) throw Error::usage("autoencoder checkpoint without a model");
    const auto& m = *ckpt.autoencoder;
    put_u64(out, m.input_dim);
    put_u64(out, m.bottleneck);
    put_u64(out, m.side_dim);
    put_u64(out, static_cast<std::uint64_t>(m.hidden_transfer));
    put_u64(out, static_cast<std::uint64_t>(m.output_transfer));
    put_matrix(out, m.encoder_w);
    put_vector(out, m.encoder_b);
    put_matrix(out, m.decoder_w);
    put_vector(out, m.decoder_b);
  } else {
    if (!ckpt.factors) throw Error::usage("factorization checkpoint without a model");
    const auto& m = *ckpt.factors;
    put_u64(out, m.rank);
    put_f64(out, m.lambda);
    put_matrix(out, m.row_factors);
    put_matrix(out, m.col_factors);
  }
  if (!out) throw Error::data("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::data("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error::data(path + " is not a checkpoint file");
  }

  Checkpoint ckpt;
  const std::uint64_t kind = get_u64(in);
  if (kind != 1 && kind != 2) throw Error::data(path + ": unknown checkpoint kind");
  ckpt.kind = static_cast<Checkpoint::Kind>(kind);
  ckpt.orientation = static_cast<Orientation>(get_u64(in));
  ckpt.scale.min_rating = get_f64(in);
  ckpt.scale.max_rating = get_f64(in);
  ckpt.train_seed = get_u64(in);
  ckpt.epochs_trained = get_u64(in);

  ckpt.bias.global_mean = get_f64(in);
  const std::uint64_t n_rows = get_u64(in);
  ckpt.bias.row_means.resize(n_rows);
  for (auto& v : ckpt.bias.row_means) v = get_f64(in);
  ckpt.bias.row_counts.resize(n_rows);
  for (auto& c : ckpt.bias.row_counts) c = static_cast<std::uint32_t>(get_u64(in));

  if (ckpt.kind == Checkpoint::Kind::kAutoencoder) {
    AutoencoderModel m;
    m.input_dim = get_u64(in);
    m.bottleneck = get_u64(in);
    m.side_dim = get_u64(in);
    m.hidden_transfer = static_cast<Transfer>(get_u64(in));
    m.output_transfer = static_cast<Transfer>(get_u64(in));
    get_matrix(in, m.encoder_w);
    get_vector(in, m.encoder_b);
    get_matrix(in, m.decoder_w);
    get_vector(in, m.decoder_b);
    ckpt.autoencoder = std::move(m);
  } else {
    MFModel m;
    m.rank = get_u64(in);
    m.lambda = get_f64(in);
    get_matrix(in, m.row_factors);
    get_matrix(in, m.col_factors);
    ckpt.factors = std::move(m);
  }
  if (!in) throw Error::data(path + ": truncated checkpoint");
  return ckpt;
}

}  // namespace cfrec
