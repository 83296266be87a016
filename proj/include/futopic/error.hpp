#pragma once

#include <stdexcept>
#include <string>

namespace futopic {

// Base for every failure the library reports. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files, missing stores.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bytes on disk that do not follow a documented layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace futopic
