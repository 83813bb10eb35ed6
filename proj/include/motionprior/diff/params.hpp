#pragma once

#include "motionprior/diff/tape.hpp"

#include <string>
#include <vector>

namespace motionprior::diff {

struct Segment {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

/// Flat parameter vector with a named, non-overlapping, covering segment layout.
/// Each segment is viewed as a row-major rows x cols block.
class ParamVector {
 public:
  using ConstView = Eigen::Map<const Mat>;
  using View = Eigen::Map<Mat>;

  Segment& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  bool has(const std::string& name) const;
  const Segment& segment(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }

  View view(const std::string& name);
  ConstView view(const std::string& name) const;
  Mat get(const std::string& name) const { return view(name); }
  void set(const std::string& name, const Mat& value);

  Vec& values() { return values_; }
  const Vec& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

  /// Same layout, all zeros.
  ParamVector zeros_like() const;
  bool same_layout(const ParamVector& other) const;

 private:
  std::vector<Segment> segments_;
  Vec values_;
};

}  // namespace motionprior::diff
