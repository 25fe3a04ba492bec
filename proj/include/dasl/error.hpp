#pragma once

#include <stdexcept>
#include <string>

namespace dasl {

// All failures carry a short machine-parsable class tag; the CLI prints
// them as "error[<tag>]: <message>" and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string tag, const std::string& msg)
      : std::runtime_error(msg), tag_(std::move(tag)) {}
  const std::string& tag() const { return tag_; }

 private:
  std::string tag_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error("contract", msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error("data", msg) {}
};

struct IngestError : Error {
  explicit IngestError(const std::string& msg) : Error("ingest", msg) {}
};

struct SamplingError : Error {
  explicit SamplingError(const std::string& msg) : Error("sampling", msg) {}
};

struct ProjectionError : Error {
  explicit ProjectionError(const std::string& msg) : Error("projection", msg) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& msg) : Error("divergence", msg) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& msg) : Error("checkpoint", msg) {}
};

struct MetricError : Error {
  explicit MetricError(const std::string& msg) : Error("metric", msg) {}
};

}  // namespace dasl
