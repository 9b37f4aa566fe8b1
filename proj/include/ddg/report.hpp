#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ddg/theory.hpp"
#include "ddg/training.hpp"

namespace ddg {

// Codeword-level analysis of a trained checkpoint over a dataset: per-sample
// index grids, per-domain usage histograms, and the cross-domain histogram
// L1 matrix at two granularities. The fine histogram splits each codeword's
// Voronoi cell into `sub_bins` distance shells (thresholds are global
// per-codeword distance quantiles, so the fine binning refines the coarse
// one by construction).
struct InspectionResult {
  int grid = 0;
  int num_codewords = 0;
  int sub_bins = 0;
  std::vector<std::vector<int>> index_grids;          // per sample, g*g indices
  std::vector<std::vector<double>> domain_usage;      // [M][N] counts
  std::vector<std::vector<double>> domain_fine;       // [M][N*sub_bins] counts
  std::vector<std::vector<double>> l1_coarse;         // [M][M]
  std::vector<std::vector<double>> l1_fine;           // [M][M]
};

InspectionResult inspect_codebook(const Checkpoint& ckpt, const DomainDataset& dataset,
                                  int sub_bins = 2);

nlohmann::json loo_report_json(const LooResult& loo, const RunConfig& config,
                               double wall_time_sec);
std::string loo_report_csv(const LooResult& loo, const RunConfig& config);

nlohmann::json ablation_report_json(const std::vector<AblationRow>& rows,
                                    const RunConfig& config, double wall_time_sec);
std::string ablation_report_csv(const std::vector<AblationRow>& rows,
                                const RunConfig& config);

nlohmann::json gap_report_json(const GapReport& report);
nlohmann::json theorem_suite_json(const TheoremSuiteResult& result);

nlohmann::json inspection_json(const InspectionResult& res, const RunConfig& config);
std::string inspection_index_csv(const InspectionResult& res, const DomainDataset& dataset);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace ddg
