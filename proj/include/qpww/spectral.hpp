#pragma once

// Fourier representation of real and complex functions on tori.
//
// A ModeSpace describes a box of Fourier modes k in Z^d, |k_i| <= bound, on
// the torus T^d together with an affine map k -> j = wave . k + offset that
// assigns each mode its horizontal (x) wavenumber. The circle T_x is the case
// d = 1, wave = (1). A traveling torus, where U(phi, x) = U~(phi - v x), is
// the case wave = -v: x-Fourier multipliers then act on the torus through j.
//
// Coefficients follow f(theta) = sum_k f_k e^{i k . theta}; physical values
// live on a zero-padded uniform grid (at least twice the box width per
// dimension) so that quadratic and cubic products are alias free.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "qpww/error.hpp"

namespace qpww::spectral {

using cplx = std::complex<double>;
/// Coefficients on the full padded grid, FFT index order.
using Spectrum = std::vector<cplx>;
/// Physical values on the padded grid, row-major with the last dimension fastest.
using Grid = std::vector<cplx>;

inline constexpr double kPi = std::numbers::pi;

namespace detail {

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Plans are created once per (rank, size, direction) and executed on
// caller-provided arrays; planning is serialized, execution is reentrant.
class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  fftw_plan get(int rank, int n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(rank, n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<int> dims(static_cast<std::size_t>(rank), n);
    std::size_t total = 1;
    for (int i = 0; i < rank; ++i) total *= static_cast<std::size_t>(n);
    std::vector<cplx> a(total), b(total);
    fftw_plan p = fftw_plan_dft(rank, dims.data(), reinterpret_cast<fftw_complex*>(a.data()),
                                reinterpret_cast<fftw_complex*>(b.data()), sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

 private:
  FftPlans() = default;
  ~FftPlans() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline void execute(int rank, int n, int sign, const cplx* in, cplx* out) {
  fftw_plan p = FftPlans::instance().get(rank, n, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace detail

/// Mode box, wavenumber map and padded grid of a torus T^d.
class ModeSpace {
 public:
  /// General constructor; grid == 0 selects the default padding.
  ModeSpace(int dim, int bound, std::vector<long> wave, long offset = 0, int grid = 0)
      : dim_(dim), bound_(bound), wave_(std::move(wave)), offset_(offset) {
    if (dim_ < 1) throw InvalidArgument("ModeSpace: dimension must be >= 1");
    if (bound_ < 0) throw InvalidArgument("ModeSpace: negative mode bound");
    if (static_cast<int>(wave_.size()) != dim_)
      throw InvalidArgument("ModeSpace: wave vector length must equal dimension");
    grid_ = grid > 0 ? grid : detail::next_pow2(2 * (2 * bound_ + 1));
    if (grid_ < 2 * bound_ + 1) throw InvalidArgument("ModeSpace: grid smaller than mode box");
    build_tables();
  }

  /// Periodic functions of x with |j| <= j_max.
  static ModeSpace circle(int j_max, int grid = 0) { return ModeSpace(1, j_max, {1}, 0, grid); }

  /// Traveling torus for velocity vector v: mode l carries x-wavenumber
  /// offset - v . l.
  static ModeSpace traveling(std::span<const int> velocity, int bound, long offset = 0,
                             int grid = 0) {
    std::vector<long> w(velocity.size());
    for (std::size_t i = 0; i < velocity.size(); ++i) w[i] = -static_cast<long>(velocity[i]);
    return ModeSpace(static_cast<int>(velocity.size()), bound, std::move(w), offset, grid);
  }

  int dim() const { return dim_; }
  int bound() const { return bound_; }
  int grid() const { return grid_; }
  long offset() const { return offset_; }
  std::span<const long> wave() const { return wave_; }

  std::size_t box_size() const { return t_->box_wave.size(); }
  std::size_t grid_points() const { return t_->grid_wave.size(); }

  std::span<const int> box_mode(std::size_t b) const {
    return {t_->box_modes.data() + b * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  std::span<const int> grid_mode(std::size_t g) const {
    return {t_->grid_modes.data() + g * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  std::size_t box_to_grid(std::size_t b) const { return t_->box_grid[b]; }
  long box_wavenumber(std::size_t b) const { return t_->box_wave[b]; }
  long grid_wavenumber(std::size_t g) const { return t_->grid_wave[g]; }
  bool grid_nyquist(std::size_t g) const { return t_->grid_nyquist[g] != 0; }
  bool grid_in_box(std::size_t g) const {
    for (int m : grid_mode(g))
      if (m < -bound_ || m > bound_) return false;
    return true;
  }
  /// Box index of -k for the mode stored at b.
  std::size_t box_negative(std::size_t b) const { return box_size() - 1 - b; }

  std::optional<std::size_t> box_index(std::span<const int> k) const {
    if (static_cast<int>(k.size()) != dim_) return std::nullopt;
    std::size_t idx = 0, stride = 1;
    const auto width = static_cast<std::size_t>(2 * bound_ + 1);
    for (int i = dim_ - 1; i >= 0; --i) {
      if (k[i] < -bound_ || k[i] > bound_) return std::nullopt;
      idx += static_cast<std::size_t>(k[i] + bound_) * stride;
      stride *= width;
    }
    return idx;
  }

  /// Same box, wave map and grid.
  bool compatible(const ModeSpace& o) const {
    return dim_ == o.dim_ && bound_ == o.bound_ && wave_ == o.wave_ && offset_ == o.offset_ &&
           grid_ == o.grid_;
  }

  /// Identical layout with a different wavenumber offset (a momentum block).
  ModeSpace with_offset(long offset) const { return ModeSpace(dim_, bound_, wave_, offset, grid_); }

  /// Physical coordinate of grid point g along dimension i.
  double grid_coordinate(std::size_t g, int i) const {
    std::size_t stride = 1;
    for (int k = dim_ - 1; k > i; --k) stride *= static_cast<std::size_t>(grid_);
    const auto idx = (g / stride) % static_cast<std::size_t>(grid_);
    return 2.0 * kPi * static_cast<double>(idx) / grid_;
  }

 private:
  struct Tables {
    std::vector<int> box_modes;
    std::vector<std::size_t> box_grid;
    std::vector<long> box_wave;
    std::vector<int> grid_modes;
    std::vector<long> grid_wave;
    std::vector<char> grid_nyquist;
  };

  void build_tables() {
    auto t = std::make_shared<Tables>();
    const auto d = static_cast<std::size_t>(dim_);
    const auto width = static_cast<std::size_t>(2 * bound_ + 1);
    std::size_t nbox = 1, ngrid = 1;
    for (int i = 0; i < dim_; ++i) {
      nbox *= width;
      ngrid *= static_cast<std::size_t>(grid_);
    }
    t->box_modes.resize(nbox * d);
    t->box_grid.resize(nbox);
    t->box_wave.resize(nbox);
    std::vector<int> k(d);
    for (std::size_t b = 0; b < nbox; ++b) {
      std::size_t rem = b;
      for (int i = dim_ - 1; i >= 0; --i) {
        k[i] = static_cast<int>(rem % width) - bound_;
        rem /= width;
      }
      std::size_t g = 0;
      long j = offset_;
      for (int i = 0; i < dim_; ++i) {
        g = g * static_cast<std::size_t>(grid_) +
            static_cast<std::size_t>((k[i] + grid_) % grid_);
        j += wave_[i] * k[i];
        t->box_modes[b * d + i] = k[i];
      }
      t->box_grid[b] = g;
      t->box_wave[b] = j;
    }
    t->grid_modes.resize(ngrid * d);
    t->grid_wave.resize(ngrid);
    t->grid_nyquist.resize(ngrid);
    for (std::size_t g = 0; g < ngrid; ++g) {
      std::size_t rem = g;
      long j = offset_;
      bool nyq = false;
      for (int i = dim_ - 1; i >= 0; --i) {
        int idx = static_cast<int>(rem % static_cast<std::size_t>(grid_));
        rem /= static_cast<std::size_t>(grid_);
        int m = idx <= grid_ / 2 ? idx : idx - grid_;
        if (2 * m == grid_) nyq = true;
        t->grid_modes[g * d + i] = m;
        j += wave_[i] * m;
      }
      t->grid_wave[g] = j;
      t->grid_nyquist[g] = nyq ? 1 : 0;
    }
    t_ = std::move(t);
  }

  int dim_;
  int bound_;
  std::vector<long> wave_;
  long offset_;
  int grid_ = 0;
  std::shared_ptr<const Tables> t_;
};

// ---------------------------------------------------------------------------
// Padded-grid transforms.

inline Spectrum to_spectral(const ModeSpace& s, const Grid& values) {
  if (values.size() != s.grid_points()) throw InvalidArgument("to_spectral: grid size mismatch");
  Spectrum out(values.size());
  detail::execute(s.dim(), s.grid(), FFTW_FORWARD, values.data(), out.data());
  const double scale = 1.0 / static_cast<double>(values.size());
  for (auto& c : out) c *= scale;
  return out;
}

inline Grid to_physical(const ModeSpace& s, const Spectrum& coeffs) {
  if (coeffs.size() != s.grid_points()) throw InvalidArgument("to_physical: size mismatch");
  Grid out(coeffs.size());
  detail::execute(s.dim(), s.grid(), FFTW_BACKWARD, coeffs.data(), out.data());
  return out;
}

/// Multiply every padded-grid coefficient by f(j); Nyquist modes are zeroed.
template <class Symbol>
Spectrum scale_by_wavenumber(const ModeSpace& s, Spectrum spec, Symbol&& f) {
  for (std::size_t g = 0; g < spec.size(); ++g) {
    if (s.grid_nyquist(g)) {
      spec[g] = 0.0;
    } else {
      spec[g] *= f(s.grid_wavenumber(g));
    }
  }
  return spec;
}

/// Zero every padded-grid coefficient outside the mode box.
inline void restrict_to_box(const ModeSpace& s, Spectrum& spec) {
  for (std::size_t g = 0; g < spec.size(); ++g)
    if (!s.grid_in_box(g)) spec[g] = 0.0;
}

/// Keep only the grid values' real part (used for real-valued products).
inline Grid real_part(Grid g) {
  for (auto& v : g) v = v.real();
  return g;
}

// ---------------------------------------------------------------------------
// Box-truncated fields.

/// A function on a torus stored as coefficients on a finite mode box.
class Field {
 public:
  explicit Field(ModeSpace space) : space_(std::move(space)), c_(space_.box_size()) {}
  Field(ModeSpace space, std::vector<cplx> coeffs) : space_(std::move(space)), c_(std::move(coeffs)) {
    if (c_.size() != space_.box_size()) throw InvalidArgument("Field: coefficient count mismatch");
  }

  /// Truncation of padded-grid coefficients onto the box.
  static Field from_spectrum(const ModeSpace& s, const Spectrum& spec) {
    Field f(s);
    for (std::size_t b = 0; b < f.c_.size(); ++b) f.c_[b] = spec[s.box_to_grid(b)];
    return f;
  }
  static Field from_grid(const ModeSpace& s, const Grid& values) {
    return from_spectrum(s, to_spectral(s, values));
  }
  /// Samples fn(theta) on the padded grid and truncates.
  template <class Fn>
  static Field sample(const ModeSpace& s, Fn&& fn) {
    Grid values(s.grid_points());
    std::vector<double> theta(static_cast<std::size_t>(s.dim()));
    for (std::size_t g = 0; g < values.size(); ++g) {
      for (int i = 0; i < s.dim(); ++i) theta[i] = s.grid_coordinate(g, i);
      values[g] = fn(std::span<const double>(theta));
    }
    return from_grid(s, values);
  }

  const ModeSpace& space() const { return space_; }
  std::size_t size() const { return c_.size(); }
  std::span<cplx> coefficients() { return c_; }
  std::span<const cplx> coefficients() const { return c_; }
  cplx& operator[](std::size_t b) { return c_[b]; }
  const cplx& operator[](std::size_t b) const { return c_[b]; }

  /// Coefficient at multi-index k (zero outside the box).
  cplx at(std::span<const int> k) const {
    auto b = space_.box_index(k);
    return b ? c_[*b] : cplx{};
  }
  cplx at(std::initializer_list<int> k) const {
    return at(std::span<const int>(k.begin(), k.size()));
  }
  void set(std::span<const int> k, cplx v) {
    auto b = space_.box_index(k);
    if (!b) throw InvalidArgument("Field::set: mode outside the box");
    c_[*b] = v;
  }
  void set(std::initializer_list<int> k, cplx v) { set(std::span<const int>(k.begin(), k.size()), v); }

  Spectrum to_spectrum() const {
    Spectrum spec(space_.grid_points());
    for (std::size_t b = 0; b < c_.size(); ++b) spec[space_.box_to_grid(b)] = c_[b];
    return spec;
  }
  Grid to_grid() const { return to_physical(space_, to_spectrum()); }

  /// Direct evaluation of the Fourier sum at an arbitrary point.
  cplx evaluate(std::span<const double> theta) const {
    cplx acc{};
    for (std::size_t b = 0; b < c_.size(); ++b) {
      if (c_[b] == cplx{}) continue;
      double phase = 0.0;
      auto k = space_.box_mode(b);
      for (int i = 0; i < space_.dim(); ++i) phase += k[i] * theta[i];
      acc += c_[b] * std::polar(1.0, phase);
    }
    return acc;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& v : c_) s += std::norm(v);
    return std::sqrt(s);
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Largest violation of c(-k) = conj(c(k)).
  double hermitian_defect() const {
    double m = 0.0;
    for (std::size_t b = 0; b < c_.size(); ++b)
      m = std::max(m, std::abs(c_[space_.box_negative(b)] - std::conj(c_[b])));
    return m;
  }
  /// Projection onto real-valued functions.
  Field real_part() const {
    Field out(space_);
    for (std::size_t b = 0; b < c_.size(); ++b)
      out.c_[b] = 0.5 * (c_[b] + std::conj(c_[space_.box_negative(b)]));
    return out;
  }

  Field& operator+=(const Field& o) {
    check(o);
    for (std::size_t b = 0; b < c_.size(); ++b) c_[b] += o.c_[b];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check(o);
    for (std::size_t b = 0; b < c_.size(); ++b) c_[b] -= o.c_[b];
    return *this;
  }
  Field& operator*=(cplx a) {
    for (auto& v : c_) v *= a;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(cplx a, Field f) { return f *= a; }
  friend Field operator*(Field f, cplx a) { return f *= a; }
  Field operator-() const { return cplx(-1.0) * *this; }

 private:
  void check(const Field& o) const {
    if (!space_.compatible(o.space_)) throw InvalidArgument("Field: incompatible mode spaces");
  }
  ModeSpace space_;
  std::vector<cplx> c_;
};

/// Periodic function of x: coefficient j of Field on ModeSpace::circle.
using SpectralField1D = Field;
/// Function on T^d (e.g. the Theta-torus of a traveling embedding).
using TorusField = Field;

/// Real Fourier multiplier m(j) acting through the x-wavenumber of each mode.
struct Multiplier {
  std::function<double(long)> symbol;
  /// Symbol undefined at j = 0; inputs must carry no mean component.
  bool zero_mean_only = false;

  static Multiplier abs_d() {
    return {[](long j) { return static_cast<double>(std::labs(j)); }, false};
  }
  /// |D|^s; for s < 0 the symbol is undefined at zero.
  static Multiplier abs_d_pow(double s) {
    return {[s](long j) { return j == 0 ? 0.0 : std::pow(static_cast<double>(std::labs(j)), s); },
            s < 0.0};
  }
  static Multiplier sign() {
    return {[](long j) { return j > 0 ? 1.0 : (j < 0 ? -1.0 : 0.0); }, false};
  }
  static Multiplier zero_mean_projection() {
    return {[](long j) { return j == 0 ? 0.0 : 1.0; }, false};
  }
};

/// Mean coefficients at most this fraction of a field's largest coefficient
/// are rounding residue (e.g. from sampling) and count as zero.
inline constexpr double kMeanTolerance = 1e-14;

inline bool negligible_mean(const Field& f, std::size_t b) {
  return std::abs(f[b]) <= kMeanTolerance * f.max_abs();
}

/// Scales coefficient j by symbol(j).
inline Field multiplier_apply(const Field& f, const Multiplier& m) {
  Field out(f.space());
  const auto& s = f.space();
  for (std::size_t b = 0; b < f.size(); ++b) {
    const long j = s.box_wavenumber(b);
    if (j == 0 && m.zero_mean_only) {
      if (!negligible_mean(f, b))
        throw InvalidArgument("multiplier_apply: symbol undefined on a nonzero mean component");
      continue;
    }
    out[b] = f[b] * m.symbol(j);
  }
  return out;
}

/// x-derivative: multiplies coefficient j by i j.
inline Field x_derivative(const Field& f) {
  Field out(f.space());
  for (std::size_t b = 0; b < f.size(); ++b)
    out[b] = f[b] * cplx(0.0, static_cast<double>(f.space().box_wavenumber(b)));
  return out;
}

/// omega . d/dtheta over the first omega.size() torus directions.
inline Field torus_directional_derivative(const Field& w, std::span<const double> omega) {
  const auto& s = w.space();
  if (static_cast<int>(omega.size()) > s.dim())
    throw InvalidArgument("torus_directional_derivative: frequency vector longer than torus");
  Field out(s);
  for (std::size_t b = 0; b < w.size(); ++b) {
    auto k = s.box_mode(b);
    double wl = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) wl += omega[i] * k[i];
    out[b] = w[b] * cplx(0.0, wl);
  }
  return out;
}

/// Partial derivative along torus direction i.
inline Field torus_partial(const Field& w, int i) {
  Field out(w.space());
  for (std::size_t b = 0; b < w.size(); ++b)
    out[b] = w[b] * cplx(0.0, static_cast<double>(w.space().box_mode(b)[i]));
  return out;
}

/// Alias-free product truncated to the box.
inline Field product(const Field& a, const Field& b) {
  if (!a.space().compatible(b.space())) throw InvalidArgument("product: incompatible spaces");
  Grid ga = a.to_grid();
  const Grid gb = b.to_grid();
  for (std::size_t g = 0; g < ga.size(); ++g) ga[g] *= gb[g];
  return Field::from_grid(a.space(), ga);
}

/// Translation theta -> theta + shift: coefficient k picks up e^{i k . shift}.
inline Field torus_shift(const Field& f, std::span<const double> shift) {
  Field out(f.space());
  for (std::size_t b = 0; b < f.size(); ++b) {
    auto k = f.space().box_mode(b);
    double ph = 0.0;
    for (std::size_t i = 0; i < shift.size(); ++i) ph += k[i] * shift[i];
    out[b] = f[b] * std::polar(1.0, ph);
  }
  return out;
}

/// Reflection theta -> -theta.
inline Field reflect(const Field& f) {
  Field out(f.space());
  for (std::size_t b = 0; b < f.size(); ++b) out[f.space().box_negative(b)] = f[b];
  return out;
}

/// (1/(2 pi)^d) * integral of f * g over the torus, i.e. sum_k f_k g_{-k}.
inline cplx mean_product(const Field& f, const Field& g) {
  cplx acc{};
  for (std::size_t b = 0; b < f.size(); ++b) acc += f[b] * g[f.space().box_negative(b)];
  return acc;
}

/// Sobolev norm sqrt(sum_k <k>^{2s} |f_k|^2) with <k> = (1 + |k|^2)^{1/2}.
inline double sobolev_norm(const Field& f, double s) {
  double acc = 0.0;
  for (std::size_t b = 0; b < f.size(); ++b) {
    double k2 = 0.0;
    for (int k : f.space().box_mode(b)) k2 += static_cast<double>(k) * k;
    acc += std::pow(1.0 + k2, s) * std::norm(f[b]);
  }
  return std::sqrt(acc);
}

}  // namespace qpww::spectral
