#include "btabl/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "btabl/error.hpp"

namespace btabl {

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    fail(ErrorKind::shape, "matrix dimensions must be positive, got " + std::to_string(rows) +
                               "x" + std::to_string(cols));
  }
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::shape,
         std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::format: return "format error";
    case ErrorKind::label: return "label error";
    case ErrorKind::index: return "index error";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::data: return "data error";
    case ErrorKind::numerical: return "numerical failure";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  check_dims(rows, cols);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_dims(rows, cols);
  if (data_.size() != rows * cols) {
    fail(ErrorKind::shape, "matrix data length " + std::to_string(data_.size()) +
                               " does not match " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  check_dims(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::shape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::shape,
         "matmul: shape mismatch " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "hadamard");
  Matrix out(a.rows(), a.cols());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix out(a.rows(), a.cols());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  for (double& v : out.data()) v *= factor;
  return out;
}

Matrix row_softmax(const Matrix& e) {
  Matrix out(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    auto in = e.row(i);
    auto o = out.row(i);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - peak);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

}  // namespace btabl
