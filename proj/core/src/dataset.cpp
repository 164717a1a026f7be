#include "maculab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "maculab/rng.hpp"
#include "maculab/strings.hpp"

namespace maculab {

namespace {

[[noreturn]] void cell_error(const std::filesystem::path& path, size_t line_no,
                             const std::string& column, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line_no << ": column '" << column << "': " << what;
  throw std::invalid_argument(os.str());
}

std::optional<bool> parse_binary_cell(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  if (t == "0") return false;
  if (t == "1") return true;
  throw std::invalid_argument("expected 0 or 1, got '" + t + "'");
}

constexpr const char* kFixedColumns[] = {
    "patient_id", "eye",     "image_path", "cpt_um", "cst_um",          "srf",
    "irf",        "fovea_x", "fovea_y",    "disc_x", "disc_y",          "disc_diameter_px"};
constexpr size_t kNumFixedColumns = 12;

}  // namespace

const GraderAssessment* EyeImageRecord::find_grader(const std::string& grader_id) const {
  for (const auto& g : graders)
    if (g.grader_id == grader_id) return &g;
  return nullptr;
}

Split SplitAssignment::at(const std::string& patient_id) const {
  const auto it = by_patient.find(patient_id);
  if (it == by_patient.end())
    throw std::invalid_argument("patient not in split assignment: " + patient_id);
  return it->second;
}

std::string to_string(Eye e) { return e == Eye::left ? "L" : "R"; }

std::string to_string(HardExudateLocation loc) {
  switch (loc) {
    case HardExudateLocation::none: return "none";
    case HardExudateLocation::within_500um: return "500um";
    case HardExudateLocation::within_1dd: return "1dd";
    case HardExudateLocation::within_2dd: return "2dd";
    case HardExudateLocation::beyond: return "beyond";
  }
  return "none";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::tune: return "tune";
    case Split::validation: return "validation";
  }
  return "train";
}

Eye eye_from_string(const std::string& s) {
  if (s == "L") return Eye::left;
  if (s == "R") return Eye::right;
  throw std::invalid_argument("expected eye L or R, got '" + s + "'");
}

HardExudateLocation hardex_loc_from_string(const std::string& s) {
  if (s == "none") return HardExudateLocation::none;
  if (s == "500um") return HardExudateLocation::within_500um;
  if (s == "1dd") return HardExudateLocation::within_1dd;
  if (s == "2dd") return HardExudateLocation::within_2dd;
  if (s == "beyond") return HardExudateLocation::beyond;
  throw std::invalid_argument("unknown hard exudate location '" + s + "'");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "tune") return Split::tune;
  if (s == "validation") return Split::validation;
  throw std::invalid_argument("unknown split '" + s + "'");
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open manifest: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty manifest: " + path.string());
  std::vector<std::string> header = split(trim(line), ',');
  while (!header.empty() && header.back().empty()) header.pop_back();

  if (header.size() < kNumFixedColumns)
    throw std::invalid_argument(path.string() + ": header has fewer than the 12 fixed columns");
  for (size_t i = 0; i < kNumFixedColumns; ++i)
    if (header[i] != kFixedColumns[i])
      cell_error(path, 1, header[i], std::string("expected header '") + kFixedColumns[i] + "'");
  if ((header.size() - kNumFixedColumns) % 3 != 0)
    throw std::invalid_argument(path.string() + ": grader columns are not in blocks of 3");

  std::vector<std::string> grader_ids;
  for (size_t i = kNumFixedColumns; i < header.size(); i += 3) {
    const std::string& col = header[i];
    const size_t us = col.find('_');
    if (us == std::string::npos || col.substr(us) != "_gradable")
      cell_error(path, 1, col, "expected a g<k>_gradable column");
    const std::string gid = col.substr(0, us);
    if (header[i + 1] != gid + "_hardex_loc" || header[i + 2] != gid + "_dme")
      cell_error(path, 1, col, "grader block must be gradable,hardex_loc,dme");
    grader_ids.push_back(gid);
  }

  Manifest manifest;
  manifest.dataset_id = path.stem().string();

  std::set<std::pair<std::string, std::string>> seen_eyes;
  std::set<std::string> seen_paths;

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    std::vector<std::string> cells = split(row, ',');
    if (cells.size() != header.size())
      cell_error(path, line_no, "(row)",
                 "expected " + std::to_string(header.size()) + " cells, got " +
                     std::to_string(cells.size()));

    EyeImageRecord rec;
    rec.patient_id = trim(cells[0]);
    if (rec.patient_id.empty()) cell_error(path, line_no, "patient_id", "must be non-empty");
    try {
      rec.eye = eye_from_string(trim(cells[1]));
    } catch (const std::exception& e) {
      cell_error(path, line_no, "eye", e.what());
    }
    rec.image_path = trim(cells[2]);

    auto num = [&](size_t idx) -> std::optional<double> {
      const auto v = parse_double(cells[idx]);
      if (!v && !trim(cells[idx]).empty())
        cell_error(path, line_no, header[idx], "not a number: '" + cells[idx] + "'");
      return v;
    };

    rec.labels.center_point_thickness_um = num(3);
    rec.labels.central_subfield_thickness_um = num(4);
    if (!rec.labels.center_point_thickness_um && !rec.labels.central_subfield_thickness_um)
      cell_error(path, line_no, "cpt_um", "record needs at least one thickness field");
    for (const auto& t : {rec.labels.center_point_thickness_um,
                          rec.labels.central_subfield_thickness_um})
      if (t && *t <= 0) cell_error(path, line_no, "cpt_um", "thickness must be > 0");

    try {
      rec.labels.srf_present = parse_binary_cell(cells[5]);
      rec.labels.irf_present = parse_binary_cell(cells[6]);
    } catch (const std::exception& e) {
      cell_error(path, line_no, "srf/irf", e.what());
    }

    const auto fx = num(7), fy = num(8), dx = num(9), dy = num(10), dd = num(11);
    if (!fx || !fy || !dx || !dy || !dd)
      cell_error(path, line_no, "landmarks", "fovea/disc coordinates are required");
    rec.landmarks = {*fx, *fy, *dx, *dy, *dd};
    if (rec.landmarks.disc_diameter_px <= 0)
      cell_error(path, line_no, "disc_diameter_px", "must be > 0");

    for (size_t g = 0; g < grader_ids.size(); ++g) {
      const size_t base = kNumFixedColumns + 3 * g;
      const std::string gradable_cell = trim(cells[base]);
      if (gradable_cell.empty()) continue;  // this grader never saw the image
      GraderAssessment ga;
      ga.grader_id = grader_ids[g];
      try {
        ga.gradable = parse_binary_cell(gradable_cell).value();
        const std::string loc = trim(cells[base + 1]);
        ga.hardex_loc = loc.empty() ? HardExudateLocation::none : hardex_loc_from_string(loc);
        const auto dme = parse_binary_cell(cells[base + 2]);
        ga.dme_judgment = dme.value_or(false);
      } catch (const std::exception& e) {
        cell_error(path, line_no, header[base], e.what());
      }
      rec.graders.push_back(std::move(ga));
    }

    if (!seen_eyes.insert({rec.patient_id, to_string(rec.eye)}).second)
      cell_error(path, line_no, "eye",
                 "duplicate record for patient " + rec.patient_id + " eye " + to_string(rec.eye));
    if (!rec.image_path.empty() && !seen_paths.insert(rec.image_path).second)
      cell_error(path, line_no, "image_path", "duplicate image path " + rec.image_path);

    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  // Union of grader ids over all records, in first-appearance order.
  std::vector<std::string> grader_ids;
  for (const auto& rec : manifest.records)
    for (const auto& g : rec.graders)
      if (std::find(grader_ids.begin(), grader_ids.end(), g.grader_id) == grader_ids.end())
        grader_ids.push_back(g.grader_id);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());

  std::vector<std::string> header(kFixedColumns, kFixedColumns + kNumFixedColumns);
  for (const auto& gid : grader_ids) {
    header.push_back(gid + "_gradable");
    header.push_back(gid + "_hardex_loc");
    header.push_back(gid + "_dme");
  }
  out << join(header, ',') << "\n";

  auto opt_num = [](const std::optional<double>& v) {
    return v ? format_double_roundtrip(*v) : std::string();
  };
  auto opt_bin = [](const std::optional<bool>& v) {
    return v ? std::string(*v ? "1" : "0") : std::string();
  };

  for (const auto& rec : manifest.records) {
    std::vector<std::string> cells = {
        rec.patient_id,
        to_string(rec.eye),
        rec.image_path,
        opt_num(rec.labels.center_point_thickness_um),
        opt_num(rec.labels.central_subfield_thickness_um),
        opt_bin(rec.labels.srf_present),
        opt_bin(rec.labels.irf_present),
        format_double_roundtrip(rec.landmarks.fovea_x),
        format_double_roundtrip(rec.landmarks.fovea_y),
        format_double_roundtrip(rec.landmarks.disc_x),
        format_double_roundtrip(rec.landmarks.disc_y),
        format_double_roundtrip(rec.landmarks.disc_diameter_px),
    };
    for (const auto& gid : grader_ids) {
      const GraderAssessment* g = rec.find_grader(gid);
      if (!g) {
        cells.insert(cells.end(), {"", "", ""});
      } else {
        cells.push_back(g->gradable ? "1" : "0");
        cells.push_back(to_string(g->hardex_loc));
        cells.push_back(g->dme_judgment ? "1" : "0");
      }
    }
    for (const auto& c : cells)
      if (c.find(',') != std::string::npos)
        throw std::runtime_error("manifest cell contains a comma: " + c);
    out << join(cells, ',') << "\n";
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path.string());
}

bool derive_cidme(const OCTLabels& labels, ThicknessRule rule, double threshold_um) {
  const auto& field = rule == ThicknessRule::cpt ? labels.center_point_thickness_um
                                                 : labels.central_subfield_thickness_um;
  if (!field)
    throw std::invalid_argument(rule == ThicknessRule::cpt
                                    ? "derive_cidme: center point thickness absent"
                                    : "derive_cidme: central subfield thickness absent");
  return *field >= threshold_um;
}

SplitAssignment split_by_patient(const Manifest& manifest, const SplitFractions& fractions,
                                 uint64_t seed) {
  if (manifest.records.empty())
    throw std::invalid_argument("split_by_patient: empty manifest");
  if (fractions.train < 0 || fractions.tune < 0 || fractions.validation < 0)
    throw std::invalid_argument("split_by_patient: fractions must be nonnegative");
  const double total = fractions.train + fractions.tune + fractions.validation;
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split_by_patient: fractions must sum to 1");

  std::vector<std::string> patients = distinct_patients(manifest);
  std::sort(patients.begin(), patients.end());  // canonical order before shuffling
  Rng rng(seed);
  rng.shuffle(patients);

  const auto n = static_cast<double>(patients.size());
  const auto b1 = static_cast<size_t>(std::llround(n * fractions.train));
  const auto b2 = static_cast<size_t>(std::llround(n * (fractions.train + fractions.tune)));

  SplitAssignment out;
  for (size_t i = 0; i < patients.size(); ++i) {
    const Split s = i < b1 ? Split::train : (i < b2 ? Split::tune : Split::validation);
    out.by_patient.emplace(patients[i], s);
  }
  return out;
}

Manifest filter_gradable(const Manifest& manifest, const std::string& grader_id) {
  bool known = false;
  for (const auto& rec : manifest.records)
    if (rec.find_grader(grader_id)) {
      known = true;
      break;
    }
  if (!known)
    throw std::invalid_argument("filter_gradable: unknown grader_id '" + grader_id + "'");

  Manifest out;
  out.dataset_id = manifest.dataset_id;
  for (const auto& rec : manifest.records) {
    const GraderAssessment* g = rec.find_grader(grader_id);
    if (g && g->gradable) out.records.push_back(rec);
  }
  return out;
}

Manifest subset_by_split(const Manifest& manifest, const SplitAssignment& splits, Split which) {
  Manifest out;
  out.dataset_id = manifest.dataset_id;
  for (const auto& rec : manifest.records)
    if (splits.at(rec.patient_id) == which) out.records.push_back(rec);
  return out;
}

std::vector<std::string> distinct_patients(const Manifest& manifest) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& rec : manifest.records)
    if (seen.insert(rec.patient_id).second) out.push_back(rec.patient_id);
  return out;
}

void save_split_assignment(const SplitAssignment& splits, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write splits: " + path.string());
  out << "patient_id,split\n";
  std::vector<std::string> patients;
  patients.reserve(splits.by_patient.size());
  for (const auto& [pid, _] : splits.by_patient) patients.push_back(pid);
  std::sort(patients.begin(), patients.end());
  for (const auto& pid : patients) out << pid << "," << to_string(splits.by_patient.at(pid)) << "\n";
}

SplitAssignment load_split_assignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open splits: " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "patient_id,split")
    throw std::invalid_argument("bad splits header in " + path.string());
  SplitAssignment out;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto cells = split(row, ',');
    if (cells.size() != 2)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected patient_id,split");
    if (!out.by_patient.emplace(trim(cells[0]), split_from_string(trim(cells[1]))).second)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": duplicate patient " + cells[0]);
  }
  return out;
}

}  // namespace maculab
