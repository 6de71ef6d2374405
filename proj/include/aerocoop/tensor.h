#ifndef AEROCOOP_TENSOR_H_
#define AEROCOOP_TENSOR_H_

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <memory>
#include <vector>

namespace aerocoop {

// Dense row-major 3-D array. Images are indexed (row, col, channel) and BEV
// maps (ix, iy, channel); the innermost axis is always contiguous.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2) {
    if (d0 < 0 || d1 < 0 || d2 < 0) {
      throw std::invalid_argument("Tensor3: negative dimension");
    }
    data_.assign(static_cast<size_t>(d0) * d1 * d2, fill);
  }

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j, int k) { return data_[offset(i, j, k)]; }
  double operator()(int i, int j, int k) const {
    return data_[offset(i, j, k)];
  }

  std::span<double> row(int i, int j) {
    return {data_.data() + offset(i, j, 0), static_cast<size_t>(d2_)};
  }
  std::span<const double> row(int i, int j) const {
    return {data_.data() + offset(i, j, 0), static_cast<size_t>(d2_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor3& o) const {
    return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_;
  }

  std::string shape_string() const {
    return std::to_string(d0_) + "x" + std::to_string(d1_) + "x" +
           std::to_string(d2_);
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  size_t offset(int i, int j, int k) const {
    return (static_cast<size_t>(i) * d1_ + j) * d2_ + k;
  }

  int d0_ = 0;
  int d1_ = 0;
  int d2_ = 0;
  std::vector<double> data_;
};

// Row-major 2-D array used for masks and single-channel images.
template <typename T>
class Array2 {
 public:
  Array2() = default;
  Array2(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  T& at_flat(size_t i) { return data_[i]; }
  const T& at_flat(size_t i) const { return data_[i]; }

  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Array2&, const Array2&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// H x W grid of K-vectors in which most pixels share one default row.
// Reading an unset pixel yields the default row; mutable access copies the
// default into a private row first. Rows live in fixed-size chunks, so spans
// stay valid while other rows are added.
class SparseRows {
 public:
  SparseRows() = default;
  SparseRows(int rows, int cols, int k, double fill = 0.0)
      : rows_(rows), cols_(cols), k_(k),
        index_(static_cast<size_t>(rows) * cols, -1),
        default_(static_cast<size_t>(k), fill) {
    if (rows < 0 || cols < 0 || k < 0) {
      throw std::invalid_argument("SparseRows: negative dimension");
    }
  }

  SparseRows(const SparseRows& other)
      : rows_(other.rows_), cols_(other.cols_), k_(other.k_),
        index_(other.index_), default_(other.default_), count_(other.count_) {
    for (const auto& chunk : other.chunks_) {
      chunks_.push_back(std::make_unique<double[]>(kChunkRows * k_));
      std::copy(chunk.get(), chunk.get() + kChunkRows * k_,
                chunks_.back().get());
    }
  }
  SparseRows& operator=(const SparseRows& other) {
    if (this != &other) *this = SparseRows(other);
    return *this;
  }
  SparseRows(SparseRows&&) noexcept = default;
  SparseRows& operator=(SparseRows&&) noexcept = default;

  static SparseRows from_dense(const Tensor3& t) {
    SparseRows out(t.dim0(), t.dim1(), t.dim2());
    for (int i = 0; i < t.dim0(); ++i) {
      for (int j = 0; j < t.dim1(); ++j) {
        const auto src = t.row(i, j);
        std::copy(src.begin(), src.end(), out.row(i, j).begin());
      }
    }
    return out;
  }

  Tensor3 to_dense() const {
    Tensor3 out(rows_, cols_, k_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        const auto src = row(i, j);
        std::copy(src.begin(), src.end(), out.row(i, j).begin());
      }
    }
    return out;
  }

  int dim0() const { return rows_; }
  int dim1() const { return cols_; }
  int dim2() const { return k_; }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_) + "x" +
           std::to_string(k_);
  }

  bool has_row(int i, int j) const { return index_[flat(i, j)] >= 0; }
  size_t stored_rows() const { return count_; }

  std::span<const double> default_row() const { return default_; }
  // Changes the row seen at every unset pixel.
  std::span<double> mutable_default_row() { return default_; }

  std::span<const double> row(int i, int j) const {
    const long slot = index_[flat(i, j)];
    return slot < 0 ? std::span<const double>(default_) : stored(slot);
  }

  std::span<double> row(int i, int j) {
    long& slot = index_[flat(i, j)];
    if (slot < 0) {
      slot = static_cast<long>(count_++);
      if (static_cast<size_t>(slot) / kChunkRows >= chunks_.size()) {
        chunks_.push_back(std::make_unique<double[]>(kChunkRows * k_));
      }
      auto dst = stored(slot);
      std::copy(default_.begin(), default_.end(), dst.begin());
      return dst;
    }
    return stored(slot);
  }

 private:
  static constexpr size_t kChunkRows = 4096;

  size_t flat(int i, int j) const {
    if (i < 0 || j < 0 || i >= rows_ || j >= cols_) {
      throw std::out_of_range("SparseRows: pixel outside the grid");
    }
    return static_cast<size_t>(i) * cols_ + j;
  }

  std::span<double> stored(long slot) const {
    const size_t s = static_cast<size_t>(slot);
    return {chunks_[s / kChunkRows].get() + (s % kChunkRows) * k_,
            static_cast<size_t>(k_)};
  }

  int rows_ = 0;
  int cols_ = 0;
  int k_ = 0;
  std::vector<long> index_;
  std::vector<double> default_;
  std::vector<std::unique_ptr<double[]>> chunks_;
  size_t count_ = 0;
};

}  // namespace aerocoop

#endif  // AEROCOOP_TENSOR_H_
