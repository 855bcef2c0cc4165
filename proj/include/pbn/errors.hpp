#pragma once

#include <stdexcept>
#include <string>

namespace pbn {

// Invalid model content: bad file syntax, broken invariants, dangling
// references. CLI maps this to exit code 2.
class model_error : public std::runtime_error {
public:
  explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

// Syntax or semantic error tied to a line of a PBN text file.
class parse_error : public model_error {
public:
  parse_error(int line, const std::string& what)
      : model_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const { return line_; }

private:
  int line_;
};

// A configured budget (theta, k, table memory) cannot be met. CLI maps this
// to exit code 3.
class resource_error : public std::runtime_error {
public:
  explicit resource_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pbn
