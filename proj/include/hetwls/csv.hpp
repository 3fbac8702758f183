#pragma once

// CSV readers and writers for regression datasets, light curves and catalog
// manifests. Comma delimited, header row required, '.' decimal point. Blank
// lines and trailing carriage returns are ignored.

#include "hetwls/estimators.hpp"
#include "hetwls/periodfit.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hetwls {

// Header y[,sigma][,group],x1..xp in any column order; x columns must be
// numbered 1..p without gaps. Group labels are positive integers and are
// renumbered 1..M in increasing label order. Throws ParseError on malformed
// input and MissingColumn when y or x1 is absent.
RegressionData parse_regression_csv(std::string_view text);
RegressionData read_regression_csv(const std::filesystem::path& path);
std::string regression_csv(const RegressionData& data);

// Header t,mag,err.
LightCurve parse_light_curve_csv(std::string_view text);
LightCurve read_light_curve_csv(const std::filesystem::path& path);
std::string light_curve_csv(const LightCurve& lc);

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest's directory
  double true_period = 0.0;
};

// Header path,true_period. A header-only manifest yields no entries.
std::vector<ManifestEntry> parse_manifest_csv(std::string_view text,
                                              const std::filesystem::path& base_dir = {});
std::vector<ManifestEntry> read_manifest_csv(const std::filesystem::path& path);

// Whole-file read; throws IoError.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hetwls
