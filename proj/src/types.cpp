#include "avfp/types.hpp"

#include <utility>

namespace avfp {
namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table,
             const char* what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw Error(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Dataset, std::string_view>, 2> kDatasetNames{{
    {Dataset::CremaD, "CREMA-D"},
    {Dataset::Ravdess, "RAVDESS"},
}};

constexpr std::array<std::pair<Generator, std::string_view>, 3> kGeneratorNames{{
    {Generator::Gaga, "GAGA"},
    {Generator::Live, "LIVE"},
    {Generator::Huny, "HUNY"},
}};

constexpr std::array<std::pair<Gender, std::string_view>, 3> kGenderNames{{
    {Gender::Female, "female"},
    {Gender::Male, "male"},
    {Gender::Unknown, "unknown"},
}};

constexpr std::array<std::pair<Ethnicity, std::string_view>, 5> kEthnicityNames{{
    {Ethnicity::AfricanAmerican, "african_american"},
    {Ethnicity::Asian, "asian"},
    {Ethnicity::Caucasian, "caucasian"},
    {Ethnicity::Hispanic, "hispanic"},
    {Ethnicity::Unknown, "unknown"},
}};

constexpr std::array<std::pair<AgeRange, std::string_view>, 4> kAgeNames{{
    {AgeRange::Age20To30, "20-30"},
    {AgeRange::Age31To45, "31-45"},
    {AgeRange::Age46To60, "46-60"},
    {AgeRange::Unknown, "unknown"},
}};

}  // namespace

std::string_view to_string(Dataset d) { return name_of(d, kDatasetNames); }
std::string_view to_string(Generator g) { return name_of(g, kGeneratorNames); }
std::string_view to_string(Gender g) { return name_of(g, kGenderNames); }
std::string_view to_string(Ethnicity e) { return name_of(e, kEthnicityNames); }
std::string_view to_string(AgeRange a) { return name_of(a, kAgeNames); }

Dataset parse_dataset(std::string_view s) { return parse_enum(s, kDatasetNames, "dataset"); }
Generator parse_generator(std::string_view s) {
  return parse_enum(s, kGeneratorNames, "generator");
}
Gender parse_gender(std::string_view s) { return parse_enum(s, kGenderNames, "gender"); }
Ethnicity parse_ethnicity(std::string_view s) {
  return parse_enum(s, kEthnicityNames, "ethnicity");
}
AgeRange parse_age_range(std::string_view s) { return parse_enum(s, kAgeNames, "age range"); }

}  // namespace avfp
