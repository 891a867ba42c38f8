#include "defsurf/spectral/eigenbasis.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cstring>
#include <fstream>
#include <string>

namespace defsurf::spectral {

namespace {

void fix_signs(Mat& functions) {
  for (Index c = 0; c < functions.cols(); ++c) {
    Index max_row = 0;
    functions.col(c).cwiseAbs().maxCoeff(&max_row);
    if (functions(max_row, c) < Real(0)) functions.col(c) = -functions.col(c);
  }
}

void check_finite(const LaplacianPair& pair) {
  if (!pair.mass.allFinite())
    throw NumericError("eigenbasis: non-finite mass entries");
  for (int k = 0; k < pair.stiffness.outerSize(); ++k)
    for (Eigen::SparseMatrix<Real>::InnerIterator it(pair.stiffness, k); it;
         ++it)
      if (!std::isfinite(static_cast<double>(it.value())))
        throw NumericError("eigenbasis: non-finite stiffness entries");
}

}  // namespace

SpectralBasis eigenbasis(const LaplacianPair& pair, Index d,
                         std::uint64_t mesh_hash) {
  const Index n = pair.mass.size();
  if (d < 1 || d > n)
    throw ArgumentError("eigenbasis: d must be in [1, vertex_count]");
  check_finite(pair);

  const Vec inv_sqrt_mass = pair.mass.cwiseSqrt().cwiseInverse();
  Mat sym = Mat::Zero(n, n);
  for (int k = 0; k < pair.stiffness.outerSize(); ++k)
    for (Eigen::SparseMatrix<Real>::InnerIterator it(pair.stiffness, k); it;
         ++it)
      sym(it.row(), it.col()) =
          it.value() * inv_sqrt_mass[it.row()] * inv_sqrt_mass[it.col()];

  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigenbasis: dense eigensolver failed");

  SpectralBasis basis;
  basis.mesh_hash = mesh_hash;
  basis.eigenvalues = solver.eigenvalues().head(d);
  basis.eigenfunctions =
      inv_sqrt_mass.asDiagonal() * solver.eigenvectors().leftCols(d);
  fix_signs(basis.eigenfunctions);
  return basis;
}

SpectralBasis eigenbasis_iterative(const LaplacianPair& pair, Index d,
                                   std::uint64_t mesh_hash, int max_iterations,
                                   double tolerance) {
  const Index n = pair.mass.size();
  if (d < 1 || d > n)
    throw ArgumentError("eigenbasis: d must be in [1, vertex_count]");
  check_finite(pair);

  // Shift by the mass matrix so the factored operator is positive definite
  // (W is PSD with the constants in its kernel).
  const Real shift = Real(1);
  Eigen::SparseMatrix<Real> shifted = pair.stiffness;
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift * pair.mass[i];
  shifted.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Real>> factor(shifted);
  if (factor.info() != Eigen::Success)
    throw NumericError("eigenbasis_iterative: factorization failed");

  const Index block = std::min<Index>(n, d + std::max<Index>(8, d / 4));
  rng::Engine engine(0x5be5u);
  rng::NormalSampler normal;
  Mat x(n, block);
  for (Index j = 0; j < block; ++j)
    for (Index i = 0; i < n; ++i)
      x(i, j) = static_cast<Real>(normal(engine));

  auto mass_multiply = [&](const Mat& m) -> Mat {
    return pair.mass.asDiagonal() * m;
  };

  // A-orthonormalize the block in place via Cholesky of x^T A x.
  auto orthonormalize = [&](Mat& m) {
    const Mat gram = m.transpose() * mass_multiply(m);
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success)
      throw NumericError("eigenbasis_iterative: rank-deficient block");
    m = llt.matrixU().template solve<Eigen::OnTheRight>(m);
  };

  Vec prev = Vec::Constant(d, std::numeric_limits<Real>::quiet_NaN());
  Vec values(block);
  for (int iter = 0; iter < max_iterations; ++iter) {
    x = factor.solve(mass_multiply(x));
    orthonormalize(x);
    // Rayleigh-Ritz on the subspace.
    const Mat projected = x.transpose() * (pair.stiffness * x);
    Eigen::SelfAdjointEigenSolver<Mat> small(Real(0.5) *
                                             (projected + projected.transpose()));
    if (small.info() != Eigen::Success)
      throw NumericError("eigenbasis_iterative: projection solve failed");
    x = x * small.eigenvectors();
    values = small.eigenvalues();

    const Vec current = values.head(d);
    if (prev.allFinite()) {
      const Real change = (current - prev).cwiseAbs().maxCoeff();
      const Real scale = std::max<Real>(Real(1), current.cwiseAbs().maxCoeff());
      if (change <= static_cast<Real>(tolerance) * scale) break;
    }
    prev = current;
  }

  SpectralBasis basis;
  basis.mesh_hash = mesh_hash;
  basis.eigenvalues = values.head(d);
  basis.eigenfunctions = x.leftCols(d);
  fix_signs(basis.eigenfunctions);
  return basis;
}

void EigenSelection::validate(Index basis_count) const {
  if (low_count < 0 || high_begin < 0 || high_end < high_begin)
    throw ArgumentError("EigenSelection: malformed band bounds");
  if (high_end > high_begin && high_begin < low_count)
    throw ArgumentError("EigenSelection: low band overlaps high band");
  if (low_count > basis_count || high_end > basis_count)
    throw ArgumentError("EigenSelection: band exceeds basis size " +
                        std::to_string(basis_count));
}

SpectralBasis select_eigenfunctions(const SpectralBasis& basis,
                                    const EigenSelection& policy) {
  policy.validate(basis.count());
  const Index total = policy.count();
  SpectralBasis out;
  out.mesh_hash = basis.mesh_hash;
  out.eigenvalues.resize(total);
  out.eigenfunctions.resize(basis.vertex_count(), total);
  Index at = 0;
  for (Index i = 0; i < policy.low_count; ++i, ++at) {
    out.eigenvalues[at] = basis.eigenvalues[i];
    out.eigenfunctions.col(at) = basis.eigenfunctions.col(i);
  }
  for (Index i = policy.high_begin; i < policy.high_end; ++i, ++at) {
    out.eigenvalues[at] = basis.eigenvalues[i];
    out.eigenfunctions.col(at) = basis.eigenfunctions.col(i);
  }
  return out;
}

namespace {

constexpr char kCacheMagic[4] = {'D', 'S', 'E', 'B'};
constexpr std::uint32_t kCacheVersion = 1;

struct CacheHeader {
  char magic[4];
  std::uint32_t version;
  std::uint64_t mesh_hash;
  std::uint32_t d;
  std::uint32_t vertex_count;
};

}  // namespace

void save_basis_cache(const std::filesystem::path& path,
                      const SpectralBasis& basis) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_basis_cache: cannot open " + path.string());
  CacheHeader header{};
  std::memcpy(header.magic, kCacheMagic, 4);
  header.version = kCacheVersion;
  header.mesh_hash = basis.mesh_hash;
  header.d = static_cast<std::uint32_t>(basis.count());
  header.vertex_count = static_cast<std::uint32_t>(basis.vertex_count());
  out.write(reinterpret_cast<const char*>(&header), sizeof(header));

  auto write_doubles = [&](const Real* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = static_cast<double>(data[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  };
  write_doubles(basis.eigenvalues.data(),
                static_cast<std::size_t>(basis.eigenvalues.size()));
  write_doubles(basis.eigenfunctions.data(),
                static_cast<std::size_t>(basis.eigenfunctions.size()));
  if (!out) throw IoError("save_basis_cache: write failed " + path.string());
}

std::optional<SpectralBasis> load_basis_cache(
    const std::filesystem::path& path, std::uint64_t mesh_hash, Index d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  CacheHeader header{};
  in.read(reinterpret_cast<char*>(&header), sizeof(header));
  if (!in || std::memcmp(header.magic, kCacheMagic, 4) != 0 ||
      header.version != kCacheVersion || header.mesh_hash != mesh_hash ||
      header.d != static_cast<std::uint32_t>(d))
    return std::nullopt;

  SpectralBasis basis;
  basis.mesh_hash = header.mesh_hash;
  basis.eigenvalues.resize(header.d);
  basis.eigenfunctions.resize(header.vertex_count, header.d);
  auto read_doubles = [&](Real* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      data[i] = static_cast<Real>(v);
    }
  };
  read_doubles(basis.eigenvalues.data(),
               static_cast<std::size_t>(basis.eigenvalues.size()));
  read_doubles(basis.eigenfunctions.data(),
               static_cast<std::size_t>(basis.eigenfunctions.size()));
  if (!in) return std::nullopt;
  return basis;
}

}  // namespace defsurf::spectral
