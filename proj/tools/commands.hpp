#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace hsdop::cli {

struct AnalyzeOptions {
    std::vector<int> degrees;  // empty: all 0..dim
    int modes = 0;             // eigenpairs per degree; 0: use cfg.m
    std::vector<int> expect;   // expected betti per degree; empty: no check
    double tau = 1e-8;
};

struct SpectrumOptions {
    int degree = 1;
    int modes = 0;  // 0: use cfg.m
    std::string out;  // empty: stdout
};

struct DecomposeOptions {
    std::string cochain_path;
    std::string out_dir;  // empty: cfg.out_dir
};

struct GenDataOptions {
    std::string out_dir;   // empty: cfg.out_dir
    double refine = 0.0;   // > 0: regenerate on a grid scaled by this factor
};

struct TrainOptions {
    std::string data_dir;  // empty: generate the dataset from the config
    std::string out_dir;   // empty: cfg.out_dir
};

struct EvalOptions {
    std::string data_dir;
    std::string checkpoint;  // prefix of .json/.bin pair
    std::string split = "test";
    std::string out;  // report path; empty: <out_dir>/eval_report.json
};

struct SpectralEnergyOptions {
    std::string data_dir;
    std::string checkpoint;  // empty: dataset pass-through (pred = target)
    std::string split = "test";
    std::string out;  // CSV path; empty: <out_dir>/spectral_energy.csv
};

int cmd_analyze(const RunConfig& cfg, const AnalyzeOptions& opt);
int cmd_spectrum(const RunConfig& cfg, const SpectrumOptions& opt);
int cmd_decompose(const RunConfig& cfg, const DecomposeOptions& opt);
int cmd_gen_data(const RunConfig& cfg, const GenDataOptions& opt);
int cmd_train(const RunConfig& cfg, const TrainOptions& opt);
int cmd_eval(const RunConfig& cfg, const EvalOptions& opt);
int cmd_spectral_energy(const RunConfig& cfg, const SpectralEnergyOptions& opt);

}  // namespace hsdop::cli
