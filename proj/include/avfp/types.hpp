#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace avfp {

// Base for all recoverable errors raised by the library. The CLI maps
// IoError to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raised when a computation produces NaN or infinity.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

enum class Dataset : std::uint8_t { CremaD, Ravdess };
enum class Generator : std::uint8_t { Gaga, Live, Huny };
enum class Gender : std::uint8_t { Female, Male, Unknown };
enum class Ethnicity : std::uint8_t { AfricanAmerican, Asian, Caucasian, Hispanic, Unknown };
enum class AgeRange : std::uint8_t { Age20To30, Age31To45, Age46To60, Unknown };

inline constexpr std::array<Dataset, 2> kAllDatasets{Dataset::CremaD, Dataset::Ravdess};
inline constexpr std::array<Generator, 3> kAllGenerators{Generator::Gaga, Generator::Live,
                                                         Generator::Huny};

std::string_view to_string(Dataset d);
std::string_view to_string(Generator g);
std::string_view to_string(Gender g);
std::string_view to_string(Ethnicity e);
std::string_view to_string(AgeRange a);

// Parsers accept exactly the spelling produced by to_string and throw
// Error otherwise.
Dataset parse_dataset(std::string_view s);
Generator parse_generator(std::string_view s);
Gender parse_gender(std::string_view s);
Ethnicity parse_ethnicity(std::string_view s);
AgeRange parse_age_range(std::string_view s);

}  // namespace avfp
