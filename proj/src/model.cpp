#include "deconvo/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "deconvo/base64.hpp"
#include "deconvo/dft.hpp"
#include "deconvo/kernels.hpp"

namespace deconvo {
namespace {

constexpr std::uint64_t kStreamB = 1;
constexpr std::uint64_t kStreamC = 2;

std::string encode_matrix(const Matrix& M) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(M.size()) * 16);
  auto put = [&bytes](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  };
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      put(M(i, j).real());
      put(M(i, j).imag());
    }
  }
  return base64::encode(bytes);
}

Matrix decode_matrix(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  const auto bytes = base64::decode(text);
  require(bytes.size() == static_cast<std::size_t>(rows * cols) * 16,
          "array payload does not match the stated dimensions");
  std::size_t pos = 0;
  auto get = [&]() {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return std::bit_cast<double>(bits);
  };
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = get();
      const double im = get();
      M(i, j) = {re, im};
    }
  }
  return M;
}

}  // namespace

std::string to_string(BType type) {
  switch (type) {
    case BType::IdentityColumns:
      return "identity-columns";
    case BType::RandomIsometry:
      return "random-isometry";
  }
  return "unknown";
}

BType parse_btype(const std::string& name) {
  if (name == "identity-columns") return BType::IdentityColumns;
  if (name == "random-isometry") return BType::RandomIsometry;
  throw InvalidInput("unknown b_type '" + name + "'");
}

GroundTruth GroundTruth::make(const Vector& h, const Vector& m, double nu) {
  require(h.norm() > 0.0 && m.norm() > 0.0, "ground-truth factors must be nonzero");
  require(nu >= 0.0, "nu must be nonnegative");
  return {h.normalized(), m.normalized(), nu};
}

GroundTruth GroundTruth::random(Eigen::Index K, Eigen::Index N, double nu, Rng& rng) {
  Vector h = rng.unit_vector(K);
  Vector m = rng.unit_vector(N);
  return make(h, m, nu);
}

SubspaceModel::SubspaceModel(BType type, std::uint64_t seed, Matrix B, Matrix C)
    : type_(type), seed_(seed), B_(std::move(B)), C_(std::move(C)) {
  require(B_.rows() == C_.rows(), "B and C must have the same number of rows");
  require(B_.cols() >= 1 && B_.cols() <= B_.rows(), "need 1 <= K <= L");
  require(C_.cols() >= 1, "need N >= 1");
  const double sqrtL = std::sqrt(static_cast<double>(B_.rows()));
  b_rows_ = dft_columns(B_).conjugate();
  c_rows_ = sqrtL * dft_columns(C_);
}

SubspaceModel build_model(Eigen::Index L, Eigen::Index K, Eigen::Index N, BType type,
                          std::uint64_t seed) {
  require(K >= 1 && K <= L, "need 1 <= K <= L");
  require(N >= 1, "need N >= 1");
  Matrix B;
  if (type == BType::IdentityColumns) {
    B = Matrix::Identity(L, K);
  } else {
    Rng rng(derive_seed(seed, kStreamB));
    const Matrix G = rng.complex_gaussian_matrix(L, K);
    const Eigen::HouseholderQR<Matrix> qr(G);
    B = qr.householderQ() * Matrix::Identity(L, K);
  }
  Rng rng(derive_seed(seed, kStreamC));
  Matrix C = rng.complex_gaussian_matrix(L, N, 1.0 / static_cast<double>(L));
  return SubspaceModel(type, seed, std::move(B), std::move(C));
}

MeasurementSet measure(const SubspaceModel& model, const GroundTruth& truth, const Vector& e,
                       double tau) {
  require(tau >= 0.0, "tau must be nonnegative");
  require(e.size() == model.L(), "noise has wrong length");
  require(e.norm() <= tau * (1.0 + 1e-9), "noise exceeds the stated level tau");
  MeasurementSet out;
  out.y = apply_A(model, truth.X0()) + e;
  out.tau = tau;
  out.e = e;
  return out;
}

Vector apply_A(const SubspaceModel& model, const Matrix& X) {
  require(X.rows() == model.K() && X.cols() == model.N(), "X must be K x N");
  return kernels::forward_parallel(model.b_rows(), model.c_rows(), X);
}

Vector apply_A_rank1(const SubspaceModel& model, const Vector& h, const Vector& m) {
  require(h.size() == model.K() && m.size() == model.N(), "factor lengths must be K and N");
  const double sqrtL = std::sqrt(static_cast<double>(model.L()));
  const Vector w = model.B() * h;
  const Vector x = model.C() * m.conjugate();
  return sqrtL * dft(w).cwiseProduct(dft(x));
}

Matrix apply_A_adjoint(const SubspaceModel& model, const Vector& z) {
  require(z.size() == model.L(), "z must have length L");
  return kernels::adjoint_parallel(model.b_rows(), model.c_rows(), z);
}

Vector convolve_oracle(const Vector& w, const Vector& x) {
  require(w.size() == x.size(), "convolution operands must have equal length");
  const Eigen::Index L = w.size();
  Vector out = Vector::Zero(L);
  for (Eigen::Index k = 0; k < L; ++k) {
    cplx acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < L; ++j) acc += w(j) * x(((k - j) % L + L) % L);
    out(k) = acc;
  }
  return out;
}

double coherence_mu_max(const SubspaceModel& model) {
  const double max_row = model.b_rows().rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(model.L()) / static_cast<double>(model.K()) * max_row;
}

double coherence_mu_h0(const SubspaceModel& model, const Vector& h0) {
  require(h0.size() == model.K(), "h0 must have length K");
  const double norm2 = h0.squaredNorm();
  require(norm2 > 0.0, "h0 must be nonzero");
  const Vector inner = model.b_rows().conjugate() * h0;
  return static_cast<double>(model.L()) / norm2 * inner.cwiseAbs2().maxCoeff();
}

double opnorm_bound(const SubspaceModel& model, double omega) {
  require(omega >= 1.0, "omega must be at least 1");
  const double L = static_cast<double>(model.L());
  const double KN = static_cast<double>(model.K() * model.N());
  const double mu_max = std::sqrt(coherence_mu_max(model));
  return 2.0 * std::sqrt(omega * std::max(1.0, mu_max * KN / L) * std::log(L + KN));
}

nlohmann::json model_to_json(const SubspaceModel& model) {
  nlohmann::json doc;
  doc["format"] = "deconvo-model/1";
  doc["L"] = model.L();
  doc["K"] = model.K();
  doc["N"] = model.N();
  doc["b_type"] = to_string(model.b_type());
  doc["seed"] = model.seed();
  doc["dtype"] = "complex128-le";
  doc["layout"] = "row-major";
  doc["B"] = encode_matrix(model.B());
  doc["C"] = encode_matrix(model.C());
  return doc;
}

SubspaceModel model_from_json(const nlohmann::json& doc) {
  static const std::vector<std::string> kKeys = {"format", "L", "K", "N", "b_type", "seed",
                                                 "dtype", "layout", "B", "C"};
  for (const auto& [key, _] : doc.items()) {
    require(std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end(),
            "unknown model field '" + key + "'");
  }
  try {
    require(doc.at("format") == "deconvo-model/1", "unsupported model format");
    require(doc.at("dtype") == "complex128-le", "unsupported dtype");
    require(doc.at("layout") == "row-major", "unsupported layout");
    const auto L = doc.at("L").get<Eigen::Index>();
    const auto K = doc.at("K").get<Eigen::Index>();
    const auto N = doc.at("N").get<Eigen::Index>();
    require(L >= 1 && K >= 1 && N >= 1 && K <= L, "invalid model dimensions");
    Matrix B = decode_matrix(doc.at("B").get<std::string>(), L, K);
    Matrix C = decode_matrix(doc.at("C").get<std::string>(), L, N);
    return SubspaceModel(parse_btype(doc.at("b_type").get<std::string>()),
                         doc.at("seed").get<std::uint64_t>(), std::move(B), std::move(C));
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("malformed model document: ") + ex.what());
  }
}

}  // namespace deconvo
