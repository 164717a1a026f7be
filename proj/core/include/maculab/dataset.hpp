#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace maculab {

enum class Eye { left, right };

enum class HardExudateLocation { none, within_500um, within_1dd, within_2dd, beyond };

enum class ThicknessRule { cpt, cst };

enum class Split { train, tune, validation };

/// OCT-derived ground truth for one eye. The primary dataset carries center
/// point thickness, the secondary carries central subfield thickness; at
/// least one must be present and positive.
struct OCTLabels {
  std::optional<double> center_point_thickness_um;
  std::optional<double> central_subfield_thickness_um;
  std::optional<bool> srf_present;
  std::optional<bool> irf_present;
};

/// One grader's read of a fundus photo. When gradable is false the other
/// fields are ignored by every metric.
struct GraderAssessment {
  std::string grader_id;
  bool gradable = true;
  HardExudateLocation hardex_loc = HardExudateLocation::none;
  bool dme_judgment = false;
};

struct Landmarks {
  double fovea_x = 0, fovea_y = 0;
  double disc_x = 0, disc_y = 0;
  double disc_diameter_px = 0;
};

struct EyeImageRecord {
  std::string patient_id;
  Eye eye = Eye::left;
  std::string image_path;
  OCTLabels labels;
  std::vector<GraderAssessment> graders;
  Landmarks landmarks;

  const GraderAssessment* find_grader(const std::string& grader_id) const;
};

struct Manifest {
  std::string dataset_id;
  std::vector<EyeImageRecord> records;
};

struct SplitFractions {
  double train = 0, tune = 0, validation = 0;
};

/// Patient-granular split assignment; every patient of the source manifest
/// appears exactly once.
struct SplitAssignment {
  std::unordered_map<std::string, Split> by_patient;

  Split at(const std::string& patient_id) const;  // throws on unknown patient
};

std::string to_string(Eye e);
std::string to_string(HardExudateLocation loc);
std::string to_string(Split s);
Eye eye_from_string(const std::string& s);
HardExudateLocation hardex_loc_from_string(const std::string& s);
Split split_from_string(const std::string& s);

/// Parses the manifest CSV (UTF-8, header row). Grader blocks
/// g<k>_gradable,g<k>_hardex_loc,g<k>_dme are discovered from the header.
/// Malformed cells raise std::invalid_argument naming line and column;
/// duplicate (patient_id, eye) pairs and duplicate image paths are rejected.
Manifest load_manifest(const std::filesystem::path& path);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// ci-DME label: 1 iff the thickness selected by rule is >= threshold
/// (inclusive boundary). Throws std::invalid_argument if that field is absent.
bool derive_cidme(const OCTLabels& labels, ThicknessRule rule, double threshold_um);

/// Shuffles patient ids with a seeded stream and partitions them by
/// cumulative fraction of the patient count. All of a patient's images
/// follow the patient, so splits never share a patient.
SplitAssignment split_by_patient(const Manifest& manifest, const SplitFractions& fractions,
                                 uint64_t seed);

/// Records the given grader marked gradable. Unknown grader_id is an error;
/// records the grader never saw are treated as not gradable.
Manifest filter_gradable(const Manifest& manifest, const std::string& grader_id);

/// Records whose patient belongs to the requested split.
Manifest subset_by_split(const Manifest& manifest, const SplitAssignment& splits, Split which);

std::vector<std::string> distinct_patients(const Manifest& manifest);

void save_split_assignment(const SplitAssignment& splits, const std::filesystem::path& path);
SplitAssignment load_split_assignment(const std::filesystem::path& path);

}  // namespace maculab
