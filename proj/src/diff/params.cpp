#include "motionprior/diff/params.hpp"

#include "motionprior/error.hpp"

namespace motionprior::diff {

Segment& ParamVector::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  require(!has(name), ErrorKind::Config, "duplicate parameter segment '" + name + "'");
  require(rows >= 0 && cols >= 0, ErrorKind::DimensionMismatch, "negative segment shape");
  Segment seg{name, values_.size(), rows, cols};
  Vec grown = Vec::Zero(values_.size() + seg.size());
  grown.head(values_.size()) = values_;
  values_ = std::move(grown);
  segments_.push_back(seg);
  return segments_.back();
}

bool ParamVector::has(const std::string& name) const {
  for (const Segment& s : segments_)
    if (s.name == name) return true;
  return false;
}

const Segment& ParamVector::segment(const std::string& name) const {
  for (const Segment& s : segments_)
    if (s.name == name) return s;
  throw Error(ErrorKind::Config, "unknown parameter segment '" + name + "'");
}

ParamVector::View ParamVector::view(const std::string& name) {
  const Segment& s = segment(name);
  return View(values_.data() + s.offset, s.rows, s.cols);
}

ParamVector::ConstView ParamVector::view(const std::string& name) const {
  const Segment& s = segment(name);
  return ConstView(values_.data() + s.offset, s.rows, s.cols);
}

void ParamVector::set(const std::string& name, const Mat& value) {
  const Segment& s = segment(name);
  require(value.rows() == s.rows && value.cols() == s.cols, ErrorKind::DimensionMismatch,
          "set: shape mismatch for '" + name + "'");
  view(name) = value;
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out = *this;
  out.values_.setZero();
  return out;
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& a = segments_[i];
    const Segment& b = other.segments_[i];
    if (a.name != b.name || a.offset != b.offset || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

}  // namespace motionprior::diff
