#include "camp/metrics.hpp"

#include <charconv>
#include <stdexcept>

namespace camp {

void RunMetrics::log(int64_t step, std::string metric, double value) {
  if (!records_.empty() && step < records_.back().step) {
    throw std::invalid_argument("RunMetrics: step indices must be monotone");
  }
  records_.push_back({step, std::move(metric), value});
}

double RunMetrics::last(const std::string& metric) const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->metric == metric) return it->value;
  }
  throw std::invalid_argument("RunMetrics: no record for " + metric);
}

std::string format_metric_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write metrics file " + path);
  out_ << "step,metric,value\n";
  out_.flush();
}

void MetricsWriter::log(int64_t step, const std::string& metric, double value) {
  out_ << step << ',' << metric << ',' << format_metric_value(value) << '\n';
  out_.flush();
}

void MetricsWriter::log(RunMetrics& metrics, int64_t step, const std::string& metric,
                        double value) {
  metrics.log(step, metric, value);
  log(step, metric, value);
}

}  // namespace camp
