#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace sar {

// Boolean attention matrix; rows index source positions, columns index
// attendable positions. Square when derived from a dependency schedule.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(long n) : AttentionMask(n, n) {}
  AttentionMask(long rows, long cols)
      : rows_(rows), cols_(cols), bits_(static_cast<size_t>(rows * cols), 0) {}

  static AttentionMask full(long rows, long cols) {
    AttentionMask m(rows, cols);
    std::fill(m.bits_.begin(), m.bits_.end(), 1);
    return m;
  }

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  long n() const {
    assert(rows_ == cols_);
    return rows_;
  }

  bool at(long r, long c) const { return bits_[static_cast<size_t>(r * cols_ + c)] != 0; }
  void set(long r, long c, bool v) { bits_[static_cast<size_t>(r * cols_ + c)] = v ? 1 : 0; }
  const std::uint8_t* row(long r) const { return bits_.data() + r * cols_; }

  bool operator==(const AttentionMask& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && bits_ == o.bits_;
  }

 private:
  long rows_ = 0, cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace sar
