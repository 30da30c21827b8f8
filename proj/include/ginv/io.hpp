#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ginv/ginvnet.hpp"
#include "ginv/tasks.hpp"
#include "ginv/trainer.hpp"

namespace ginv::io {

// Dataset file:
//   {"task", "group_spec", "exponents"?, "seed", "n", "n_in",
//    "splits": {"train"|"val"|"test": {"inputs": [N][n][n_in], "targets": [N][n_out]}}}
// Numbers are written with 17 significant digits, so reading a file back
// reproduces every double exactly.
std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

// Checkpoint file: model kind, group spec, layer specs and one entry per
// parameter tensor {"name", "shape": [rows, cols], "data": [hex floats]},
// in the order of ginv::parameters(). Hex floats ("0x1.8p-1") make the
// round trip bit-exact.
std::string checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const std::string& text);

std::string report_to_json(const TrainReport& report);
TrainReport report_from_json(const std::string& text);

inline constexpr const char* kCsvHeader =
    "model,group,seed_count,train_mae_mean,train_mae_std,val_mae_mean,val_mae_std,"
    "test_mae_mean,test_mae_std,param_count";
std::string report_csv_row(const TrainReport& report);

enum class TableFormat { Csv, Markdown };
/// One row per report. Markdown uses the columns
/// Network | Train | Validation | Test | #Weights with mean ± std cells.
std::string merge_reports(const std::vector<TrainReport>& reports, TableFormat format);

/// Keys missing from the JSON keep the task defaults; unknown keys are errors.
TrainConfig config_from_json(const std::string& text);
std::string config_to_json(const TrainConfig& config);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

std::string hex_double(double v);
double parse_hex_double(const std::string& text);

}  // namespace ginv::io
