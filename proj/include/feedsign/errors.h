// Copyright 2026 The FeedSign Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEEDSIGN_ERRORS_H_
#define FEEDSIGN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace feedsign {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter vector or dataset does not fit the model.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or projection during SPSA.
class EstimationError : public Error {
 public:
  EstimationError(const std::string& what, double offending_value)
      : Error(what), value_(offending_value) {}
  double value() const { return value_; }

 private:
  double value_;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class OrbitError : public Error {
 public:
  using Error::Error;
};

class ReplayError : public Error {
 public:
  using Error::Error;
};

class AnalysisError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace feedsign

#endif  // FEEDSIGN_ERRORS_H_
