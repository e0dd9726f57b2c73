#pragma once

// Frequency-bin lattice conventions shared by every module: bin windows, the
// wavelength grid, correlation patterns and their vectorization into unit-norm
// feature vectors.
//
// Bins are labeled by integers n. The logical qubit lives on bins {0,1}; the
// evolution window is {-3..4} (dimension 8); qudit logical levels j=0..3 map
// to bins j-1, i.e. the central 4x4 block of the 8-bin grid. Patterns are
// indexed (row = signal bin, column = idler bin) and flattened row-major.

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace qelm {

struct BinWindow {
  int lo = -3;
  int hi = 4;

  int dimension() const { return hi - lo + 1; }
  bool contains(int bin) const { return bin >= lo && bin <= hi; }

  Eigen::Index index_of(int bin) const {
    if (!contains(bin))
      throw std::out_of_range("BinWindow: bin " + std::to_string(bin) +
                              " outside [" + std::to_string(lo) + "," +
                              std::to_string(hi) + "]");
    return static_cast<Eigen::Index>(bin - lo);
  }

  bool operator==(const BinWindow&) const = default;

  static BinWindow evolution_default() { return {-3, 4}; }
};

enum class Band { signal, idler };
enum class MeasurementTask { qubit, qudit };

// Qudit logical level j corresponds to bin kQuditLogicalBins[j].
inline constexpr std::array<int, 4> kQuditLogicalBins{-1, 0, 1, 2};

struct WavelengthGrid {
  double signal_base_nm = 1561.43;
  double idler_base_nm = 1551.72;
  double delta_nm = 0.16;
};

// Signal wavelengths increase with n, idler wavelengths decrease, so matched
// pairs (n, n) conserve energy on the symmetric grid.
inline double bin_wavelength(Band band, int n,
                             const WavelengthGrid& grid = {}) {
  return band == Band::signal ? grid.signal_base_nm + n * grid.delta_nm
                              : grid.idler_base_nm - n * grid.delta_nm;
}

// Measured bins for each task. Q=6 for qubits: a symmetric window around the
// logical bins {0,1} capturing >99% of the evolved probability at delta=1.4.
// Q=8 for qudits: the full truncated basis.
inline BinWindow measurement_window(MeasurementTask task) {
  return task == MeasurementTask::qubit ? BinWindow{-2, 3} : BinWindow{-3, 4};
}

// Nonnegative Q x Q grid of coincidence probabilities or stimulated
// intensities (row = signal bin, column = idler bin).
struct CorrelationPattern {
  Eigen::MatrixXd values;
  BinWindow window;

  void validate() const {
    if (values.rows() != window.dimension() ||
        values.cols() != window.dimension())
      throw std::invalid_argument("CorrelationPattern: shape/window mismatch");
    if (!values.allFinite() || (values.array() < 0.0).any())
      throw std::invalid_argument(
          "CorrelationPattern: entries must be finite and nonnegative");
  }
};

// Row-major flattening scaled to unit Euclidean norm; the QELM feature vector.
inline Eigen::VectorXd normalize_and_vectorize(const CorrelationPattern& p) {
  p.validate();
  const Eigen::Index q = p.values.rows();
  Eigen::VectorXd v(q * q);
  for (Eigen::Index r = 0; r < q; ++r)
    for (Eigen::Index c = 0; c < q; ++c) v[r * q + c] = p.values(r, c);
  const double n = v.norm();
  if (n <= 0.0) throw std::invalid_argument("degenerate pattern: all zero");
  return v / n;
}

}  // namespace qelm
