#include "avfp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"

namespace avfp {

namespace {

struct Labelled {
  double score;
  bool genuine;
};

std::vector<Labelled> pool(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty()) throw Error("AUC needs at least one genuine score");
  if (impostor.empty()) throw Error("AUC needs at least one impostor score");
  std::vector<Labelled> all;
  all.reserve(genuine.size() + impostor.size());
  for (double s : genuine) {
    if (std::isnan(s)) throw Error("NaN genuine score");
    all.push_back({s, true});
  }
  for (double s : impostor) {
    if (std::isnan(s)) throw Error("NaN impostor score");
    all.push_back({s, false});
  }
  return all;
}

}  // namespace

std::int64_t mann_whitney_u2(std::span<const double> genuine, std::span<const double> impostor) {
  std::vector<Labelled> all = pool(genuine, impostor);
  std::sort(all.begin(), all.end(), [](const Labelled& a, const Labelled& b) { return a.score < b.score; });
  // Twice the genuine rank sum, kept integral: a tie group spanning ranks
  // i+1..j has midrank (i+1+j)/2.
  std::int64_t rank_sum2 = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::int64_t g = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      g += all[j].genuine ? 1 : 0;
      ++j;
    }
    rank_sum2 += g * static_cast<std::int64_t>(i + 1 + j);
    i = j;
  }
  const auto G = static_cast<std::int64_t>(genuine.size());
  return rank_sum2 - G * (G + 1);
}

double auc(std::span<const double> genuine, std::span<const double> impostor) {
  const double u = static_cast<double>(mann_whitney_u2(genuine, impostor)) / 2.0;
  return u / (static_cast<double>(genuine.size()) * static_cast<double>(impostor.size())) * 100.0;
}

std::vector<std::pair<double, double>> roc_curve(std::span<const double> genuine,
                                                 std::span<const double> impostor) {
  std::vector<Labelled> all = pool(genuine, impostor);
  std::sort(all.begin(), all.end(), [](const Labelled& a, const Labelled& b) { return a.score > b.score; });
  const auto G = static_cast<double>(genuine.size());
  const auto I = static_cast<double>(impostor.size());
  std::vector<std::pair<double, double>> out{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].genuine ? tp : fp) += 1;
      ++j;
    }
    out.emplace_back(static_cast<double>(fp) / I, static_cast<double>(tp) / G);
    i = j;
  }
  return out;
}

namespace {

EvalReport evaluate_column(const ScoreTable& table, std::optional<std::size_t> index,
                           const std::string& condition, const std::string& model) {
  std::vector<double> g, im;
  for (const auto& row : table.rows) {
    if (!row.fused.scorable) continue;
    const double s = index ? row.fused.sub_scores.at(*index) : row.fused.score;
    (row.trial.label == 1 ? g : im).push_back(s);
  }
  EvalReport r;
  r.condition = condition;
  r.model = model;
  r.auc = auc(g, im);
  r.genuine_n = static_cast<std::int64_t>(g.size());
  r.impostor_n = static_cast<std::int64_t>(im.size());
  r.roc = roc_curve(g, im);
  return r;
}

}  // namespace

EvalReport evaluate(const ScoreTable& table, const std::string& condition, const std::string& model) {
  return evaluate_column(table, std::nullopt, condition, model);
}

EvalReport evaluate_submodel(const ScoreTable& table, std::size_t index, const std::string& condition) {
  if (table.rows.empty()) throw Error("empty score table");
  const auto& models = table.rows.front().models;
  if (index >= models.size()) throw Error("model index out of range");
  return evaluate_column(table, index, condition, models[index]);
}

DeltaTable delta_table(std::span<const EvalReport> reports, const std::string& reference) {
  DeltaTable out;
  out.reference = reference;
  std::map<std::string, double> ref;
  for (const auto& r : reports) {
    if (r.condition != reference) continue;
    if (!ref.emplace(r.model, r.auc).second) {
      throw Error("duplicate reference report for model '" + r.model + "'");
    }
    out.reference_auc.emplace_back(r.model, r.auc);
  }
  if (ref.empty()) throw Error("no report for reference condition '" + reference + "'");
  for (const auto& r : reports) {
    if (r.condition == reference) continue;
    auto it = ref.find(r.model);
    if (it == ref.end()) {
      throw Error("no reference AUC for model '" + r.model + "' in '" + reference + "'");
    }
    out.rows.push_back({r.condition, r.model, r.auc, r.auc - it->second});
  }
  return out;
}

namespace {

std::string one_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

}  // namespace

std::string format_delta(double delta) {
  if (std::isnan(delta)) return "nan";
  std::string s = one_decimal(delta);
  if (s != "0.0" && s.front() != '-') s.insert(s.begin(), '+');
  return s;
}

std::string format_auc(double auc_value) {
  if (std::isnan(auc_value)) return "nan";
  return one_decimal(auc_value);
}

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::Gender: return "gender";
    case Attribute::Ethnicity: return "ethnicity";
    case Attribute::AgeRange: return "age_range";
  }
  throw Error("bad attribute");
}

Attribute parse_attribute(std::string_view s) {
  if (s == "gender") return Attribute::Gender;
  if (s == "ethnicity") return Attribute::Ethnicity;
  if (s == "age_range") return Attribute::AgeRange;
  throw Error("unknown attribute '" + std::string(s) + "'");
}

FairnessTable fairness_report(const ScoreTable& table, const Catalog& catalog,
                              std::span<const Attribute> attributes, const std::string& condition,
                              const std::string& model, std::optional<std::size_t> column) {
  FairnessTable out;
  out.condition = condition;
  out.model = model;
  for (Attribute attr : attributes) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::int64_t annotated = 0, unknown = 0;
    for (const auto& row : table.rows) {
      if (!row.fused.scorable) continue;
      const AvatarVideo& enroll = catalog.video(row.trial.enroll_video);
      const IdentityRecord& who = catalog.identity(enroll.target);
      std::string_view value;
      bool known = true;
      switch (attr) {
        case Attribute::Gender:
          known = who.gender != Gender::Unknown;
          value = to_string(who.gender);
          break;
        case Attribute::Ethnicity:
          known = who.ethnicity != Ethnicity::Unknown;
          value = to_string(who.ethnicity);
          break;
        case Attribute::AgeRange:
          known = who.age_range != AgeRange::Unknown;
          value = to_string(who.age_range);
          break;
      }
      if (!known) {
        ++unknown;
        continue;
      }
      ++annotated;
      auto& [g, im] = groups[std::string(value)];
      (row.trial.label == 1 ? g : im).push_back(column ? row.fused.sub_scores.at(*column) : row.fused.score);
    }
    for (const auto& [value, scores] : groups) {
      SubgroupResult r;
      r.attribute = attr;
      r.subgroup = value;
      r.genuine_n = static_cast<std::int64_t>(scores.first.size());
      r.impostor_n = static_cast<std::int64_t>(scores.second.size());
      if (r.genuine_n > 0 && r.impostor_n > 0) r.auc = auc(scores.first, scores.second);
      out.rows.push_back(std::move(r));
    }
    out.annotated.emplace_back(attr, annotated);
    out.unknown.emplace_back(attr, unknown);
  }
  return out;
}

std::string file_safe(const std::string& condition) {
  std::string out;
  for (std::size_t i = 0; i < condition.size(); ++i) {
    const char c = condition[i];
    if (c == '-' && i + 1 < condition.size() && condition[i + 1] == '>') {
      out += "__";
      ++i;
    } else if (c == '/' || c == '|' || c == ' ') {
      out += '_';
    } else {
      out += c;
    }
  }
  return out;
}

namespace {

constexpr const char* kEmptyCell = "\xE2\x80\x94";  // U+2014

std::string pad(const std::string& s, std::size_t width) {
  // Width counts code points so the multi-byte empty-cell marker aligns.
  std::size_t len = 0;
  for (unsigned char c : s) len += (c & 0xC0) != 0x80;
  return len >= width ? s : s + std::string(width - len, ' ');
}

std::string table_text(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::size_t len = 0;
      for (unsigned char ch : row[c]) len += (ch & 0xC0) != 0x80;
      width[c] = std::max(width[c], len);
    }
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += c + 1 == row.size() ? row[c] : pad(row[c], width[c]);
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string render_delta_grid(std::span<const DeltaTable> blocks, const std::vector<std::string>& models) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"condition"};
  head.insert(head.end(), models.begin(), models.end());
  cells.push_back(head);
  for (const auto& b : blocks) {
    std::vector<std::string> ref{b.reference};
    for (const auto& m : models) {
      auto it = std::find_if(b.reference_auc.begin(), b.reference_auc.end(),
                             [&](const auto& p) { return p.first == m; });
      ref.push_back(it == b.reference_auc.end() ? kEmptyCell : format_auc(it->second));
    }
    cells.push_back(ref);
    std::vector<std::string> order;
    for (const auto& r : b.rows) {
      if (std::find(order.begin(), order.end(), r.condition) == order.end()) order.push_back(r.condition);
    }
    for (const auto& cond : order) {
      std::vector<std::string> line{cond};
      for (const auto& m : models) {
        auto it = std::find_if(b.rows.begin(), b.rows.end(),
                               [&](const DeltaRow& r) { return r.condition == cond && r.model == m; });
        line.push_back(it == b.rows.end() ? kEmptyCell : format_delta(it->delta));
      }
      cells.push_back(line);
    }
  }
  return table_text(cells);
}

std::string render_text(const RenderInput& input) {
  std::ostringstream out;
  out << "AUC (%)\n";
  std::vector<std::vector<std::string>> cells{{"condition", "model", "auc", "genuine", "impostor"}};
  for (const auto& r : input.reports) {
    cells.push_back({r.condition, r.model, format_auc(r.auc), std::to_string(r.genuine_n),
                     std::to_string(r.impostor_n)});
  }
  out << table_text(cells);

  if (!input.deltas.empty()) {
    std::vector<std::string> models;
    for (const auto& b : input.deltas) {
      for (const auto& [m, v] : b.reference_auc) {
        if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
      }
    }
    out << "\nAUC differences (percentage points) against each block's first row\n";
    out << render_delta_grid(input.deltas, models);
  }

  for (const auto& f : input.fairness) {
    out << "\nSubgroup AUC (%) for " << f.condition << " / " << f.model << "\n";
    std::vector<std::vector<std::string>> rows{{"attribute", "subgroup", "auc", "genuine", "impostor"}};
    for (const auto& r : f.rows) {
      rows.push_back({std::string(to_string(r.attribute)), r.subgroup, r.auc ? format_auc(*r.auc) : kEmptyCell,
                      std::to_string(r.genuine_n), std::to_string(r.impostor_n)});
    }
    out << table_text(rows);
    for (std::size_t i = 0; i < f.unknown.size(); ++i) {
      if (f.unknown[i].second > 0) {
        out << "excluded (" << to_string(f.unknown[i].first) << " unknown): " << f.unknown[i].second << " trials\n";
      }
    }
  }
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void render_report(const RenderInput& input, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "roc", ec);
  if (ec) throw IoError("cannot create " + (dir / "roc").string() + ": " + ec.message());

  write_file(dir / "report.txt", render_text(input));

  std::string csv = "condition,model,auc,genuine_n,impostor_n\n";
  for (const auto& r : input.reports) {
    csv += csv::join({r.condition, r.model, format_double(r.auc), std::to_string(r.genuine_n),
                      std::to_string(r.impostor_n)}) +
           "\n";
    std::string roc = "fpr,tpr\n";
    for (const auto& [fpr, tpr] : r.roc) roc += format_double(fpr) + "," + format_double(tpr) + "\n";
    write_file(dir / "roc" / (file_safe(r.condition) + "__" + file_safe(r.model) + ".csv"), roc);
  }
  write_file(dir / "report.csv", csv);

  if (!input.deltas.empty()) {
    std::string d = "reference,condition,model,auc,delta,delta_rounded\n";
    for (const auto& b : input.deltas) {
      for (const auto& r : b.rows) {
        d += csv::join({b.reference, r.condition, r.model, format_double(r.auc), format_double(r.delta),
                        format_delta(r.delta)}) +
             "\n";
      }
    }
    write_file(dir / "delta.csv", d);
  }

  if (!input.fairness.empty()) {
    std::string f = "condition,model,attribute,subgroup,auc,genuine_n,impostor_n\n";
    for (const auto& t : input.fairness) {
      for (const auto& r : t.rows) {
        f += csv::join({t.condition, t.model, std::string(to_string(r.attribute)), r.subgroup,
                        r.auc ? format_double(*r.auc) : "", std::to_string(r.genuine_n),
                        std::to_string(r.impostor_n)}) +
             "\n";
      }
    }
    write_file(dir / "fairness.csv", f);
  }
}

}  // namespace avfp
