#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace camp {

struct MetricRecord {
  int64_t step = 0;
  std::string metric;
  double value = 0.0;
};

/// Append-only metric log with monotone step indices.
class RunMetrics {
 public:
  void log(int64_t step, std::string metric, double value);
  const std::vector<MetricRecord>& records() const { return records_; }
  /// Last value recorded under `metric`; throws when absent.
  double last(const std::string& metric) const;

 private:
  std::vector<MetricRecord> records_;
};

/// Incremental CSV writer: header `step,metric,value`, one record per log
/// event, values serialized with shortest round-trip formatting.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void log(int64_t step, const std::string& metric, double value);
  void log(RunMetrics& metrics, int64_t step, const std::string& metric, double value);

 private:
  std::ofstream out_;
};

std::string format_metric_value(double v);

}  // namespace camp
