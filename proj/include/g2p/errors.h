// Copyright 2026 The g2pstudio Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef G2P_ERRORS_H_
#define G2P_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace g2p {

// Base of every error raised by the library. Each subclass maps to one
// failure kind callers may want to tell apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define G2P_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

G2P_DEFINE_ERROR(IoError);
G2P_DEFINE_ERROR(EmptyPronunciation);
G2P_DEFINE_ERROR(SplitError);
G2P_DEFINE_ERROR(VocabError);
G2P_DEFINE_ERROR(ShapeError);
G2P_DEFINE_ERROR(MaskError);
G2P_DEFINE_ERROR(LossError);
G2P_DEFINE_ERROR(NumericalError);
G2P_DEFINE_ERROR(ConfigError);
G2P_DEFINE_ERROR(LengthError);
G2P_DEFINE_ERROR(EvalError);
G2P_DEFINE_ERROR(ScoreError);
G2P_DEFINE_ERROR(BreedError);
G2P_DEFINE_ERROR(FormatError);
G2P_DEFINE_ERROR(EmptyAudio);
G2P_DEFINE_ERROR(NormalizeError);
G2P_DEFINE_ERROR(NotFound);
G2P_DEFINE_ERROR(ServiceUnavailable);
G2P_DEFINE_ERROR(RateMismatch);
G2P_DEFINE_ERROR(UnsupportedMedia);

#undef G2P_DEFINE_ERROR

// Malformed input line; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Loss became non-finite during training.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, long step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace g2p

#endif  // G2P_ERRORS_H_
