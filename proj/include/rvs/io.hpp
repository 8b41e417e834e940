#pragma once

#include "rvs/metrics.hpp"

#include <filesystem>
#include <string>

namespace rvs {

namespace fs = std::filesystem;

/// Dataset directory layout: meta.json (seed, system, noise, split) and
/// data.csv with columns t,u,y_noisy,y_clean.
void write_dataset(const fs::path& dir, const Dataset& ds);
Dataset read_dataset(const fs::path& dir);

void write_manifest(const fs::path& dir, const BankSpec& spec, std::uint64_t seed,
                    const std::vector<std::string>& dataset_dirs);

struct ModelFile {
    KernelHyper hyper;
    FitConfig cfg;
    double cost = 0.0;
    bool used_fast = false;
};

void write_model(const fs::path& file, const FittedModel& model);
ModelFile read_model(const fs::path& file);

/// Rebuilds the prediction caches of a stored model against its training
/// data (one objective evaluation).
FittedModel rehydrate_model(const ModelFile& mf, const TrainingData& data);

std::string report_json_string(const FitReport& report);
void write_report_json(const fs::path& file, const FitReport& report);
void write_report_csv(const fs::path& file, const FitReport& report);
/// Appends one row, creating the file (with header) when absent.
void append_report_row(const fs::path& file, const FitRecord& rec);
std::vector<FitRecord> read_report_csv(const fs::path& file);

void write_timings_csv(const fs::path& file, const TimingTable& table);

/// Full-precision decimal rendering used by every CSV writer.
std::string format_double(double v);

}  // namespace rvs
