#include "osanet/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "osanet/rng.hpp"

namespace osanet::cohort {

const char* to_string(SeverityLabel label) {
  switch (label) {
    case SeverityLabel::NL: return "NL";
    case SeverityLabel::MIN: return "MIN";
    case SeverityLabel::MOD: return "MOD";
    case SeverityLabel::SV: return "SV";
  }
  return "?";
}

std::optional<SeverityLabel> label_from_string(std::string_view text) {
  if (text == "NL") return SeverityLabel::NL;
  if (text == "MIN") return SeverityLabel::MIN;
  if (text == "MOD") return SeverityLabel::MOD;
  if (text == "SV") return SeverityLabel::SV;
  return std::nullopt;
}

SeverityLabel label_from_oahi3(double oahi3) {
  if (!std::isfinite(oahi3) || oahi3 < 0.0) {
    throw CohortError("oahi3 must be finite and >= 0, got " + std::to_string(oahi3));
  }
  if (oahi3 <= 1.0) return SeverityLabel::NL;
  if (oahi3 <= 5.0) return SeverityLabel::MIN;
  if (oahi3 <= 10.0) return SeverityLabel::MOD;
  return SeverityLabel::SV;
}

Cohort::Cohort(std::vector<Subject> subjects) : subjects_(std::move(subjects)) {
  for (const auto& s : subjects_) {
    const SeverityLabel expected = label_from_oahi3(s.oahi3);
    if (s.label != expected) {
      throw CohortError("subject '" + s.subject_id + "': label " + to_string(s.label) +
                        " inconsistent with oahi3 " + std::to_string(s.oahi3) + " (expected " +
                        to_string(expected) + ")");
    }
    ++counts_[static_cast<std::size_t>(s.label)];
  }
}

Cohort undersample(const Cohort& cohort, std::size_t per_class, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < cohort.subjects().size(); ++i) {
    by_class[static_cast<std::size_t>(cohort.subjects()[i].label)].push_back(i);
  }

  SplitMix64 rng(seed);
  std::vector<bool> keep(cohort.subjects().size(), false);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < per_class) {
      throw CohortError(std::string("class ") + to_string(static_cast<SeverityLabel>(c)) +
                        " has " + std::to_string(idx.size()) + " subjects, need " +
                        std::to_string(per_class));
    }
    // partial Fisher-Yates: the first per_class slots are the selection
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < per_class; ++i) keep[idx[i]] = true;
  }

  std::vector<Subject> selected;
  selected.reserve(per_class * kNumClasses);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) selected.push_back(cohort.subjects()[i]);
  }
  return Cohort(std::move(selected));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string format_oahi3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

Cohort load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw CohortError("cannot open manifest '" + path.string() + "'");

  std::string line;
  if (!std::getline(f, line)) throw CohortError("empty manifest '" + path.string() + "'");
  const auto header = split_csv_line(line);
  const bool has_label = header.size() == 4 && header[3] == "label";
  if (!(header.size() == 3 || has_label) || header[0] != "subject_id" ||
      header[1] != "edf_path" || header[2] != "oahi3") {
    throw CohortError("manifest header must be 'subject_id,edf_path,oahi3[,label]', got '" +
                      line + "'");
  }

  const std::filesystem::path base = path.parent_path();
  std::vector<Subject> subjects;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw CohortError("manifest line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    Subject s;
    s.subject_id = fields[0];
    std::filesystem::path edf(fields[1]);
    s.edf_path = edf.is_absolute() ? edf.string() : (base / edf).string();
    try {
      s.oahi3 = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw CohortError("manifest line " + std::to_string(line_no) + ": bad oahi3 '" +
                        fields[2] + "'");
    }
    s.label = label_from_oahi3(s.oahi3);
    if (has_label) {
      const auto given = label_from_string(fields[3]);
      if (!given) {
        throw CohortError("manifest line " + std::to_string(line_no) + ": unknown label '" +
                          fields[3] + "'");
      }
      if (*given != s.label) {
        throw CohortError("manifest line " + std::to_string(line_no) + ": label " + fields[3] +
                          " disagrees with oahi3 " + fields[2]);
      }
    }
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw CohortError("manifest '" + path.string() + "' lists no subjects");
  return Cohort(std::move(subjects));
}

void write_manifest(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream f(path, std::ios::binary);  // binary: byte-stable newlines
  if (!f) throw CohortError("cannot open '" + path.string() + "' for writing");
  f << "subject_id,edf_path,oahi3,label\n";
  for (const auto& s : cohort.subjects()) {
    f << s.subject_id << ',' << s.edf_path << ',' << format_oahi3(s.oahi3) << ','
      << to_string(s.label) << '\n';
  }
  if (!f) throw CohortError("write failed for '" + path.string() + "'");
}

}  // namespace osanet::cohort
