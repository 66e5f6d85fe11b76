// sttkit/errors.hpp
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

#pragma once

#include <stdexcept>
#include <string>

namespace sttkit {

/// Failure taxonomy for the whole toolkit. The CLI maps these onto exit
/// codes; library callers can switch on code() instead of string matching.
enum class Err {
  FileNotFound,
  TruncatedInput,
  MalformedContainer,
  UnsupportedEncoding,
  ExternalDecoderFailure,
  EmptyAudio,
  InvalidParameter,
  InsufficientAudio,
  InvalidModel,
  SessionClosed,
  MalformedEngineOutput,
  InvalidCorpus,
  UndefinedWer,
  ManifestError,
  OutputError,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::FileNotFound: return "FileNotFound";
    case Err::TruncatedInput: return "TruncatedInput";
    case Err::MalformedContainer: return "MalformedContainer";
    case Err::UnsupportedEncoding: return "UnsupportedEncoding";
    case Err::ExternalDecoderFailure: return "ExternalDecoderFailure";
    case Err::EmptyAudio: return "EmptyAudio";
    case Err::InvalidParameter: return "InvalidParameter";
    case Err::InsufficientAudio: return "InsufficientAudio";
    case Err::InvalidModel: return "InvalidModel";
    case Err::SessionClosed: return "SessionClosed";
    case Err::MalformedEngineOutput: return "MalformedEngineOutput";
    case Err::InvalidCorpus: return "InvalidCorpus";
    case Err::UndefinedWer: return "UndefinedWer";
    case Err::ManifestError: return "ManifestError";
    case Err::OutputError: return "OutputError";
  }
  return "Unknown";
}

class SttError : public std::runtime_error {
 public:
  SttError(Err code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) {
  throw SttError(code, std::string(err_name(code)) + ": " + what);
}

}  // namespace sttkit
