#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "hsdop/errors.hpp"

namespace {

using hsdop::cli::RunConfig;

int fail(int code, const char* what) {
    std::fprintf(stderr, "error: %s\n", what);
    return code;
}

/// Every subcommand accepts a config file; flags set on the command line
/// override its values.
CLI::Option* add_config(CLI::App* cmd, std::string* path) {
    return cmd->add_option("-c,--config", *path,
                           "run-config JSON file (defaults when omitted)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hodge spectral operator toolkit on simplicial complexes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "hsdop 0.1.0");

    int rc = 0;

    // analyze
    auto* an = app.add_subcommand(
        "analyze", "topology report: counts, Euler characteristic, spectra");
    std::string an_config, an_complex;
    hsdop::cli::AnalyzeOptions an_opt;
    int an_m = 0;
    add_config(an, &an_config);
    an->add_option("--complex", an_complex, "generator spec or mesh path");
    an->add_option("--m", an_m, "spectral truncation override");
    an->add_option("--degrees", an_opt.degrees, "degrees to report")
        ->delimiter(',');
    an->add_option("--modes", an_opt.modes, "eigenpairs per degree");
    an->add_option("--expect", an_opt.expect,
                   "expected Betti numbers per degree; mismatch exits 2")
        ->delimiter(',');
    an->add_option("--tau", an_opt.tau, "relative zero threshold");
    an->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(an_config);
        if (an->count("--complex")) cfg.complex_spec = an_complex;
        if (an->count("--m")) cfg.m = an_m;
        rc = hsdop::cli::cmd_analyze(cfg, an_opt);
    });

    // spectrum
    auto* sp = app.add_subcommand("spectrum",
                                  "export one degree's eigenvalues as JSON");
    std::string sp_config, sp_complex;
    hsdop::cli::SpectrumOptions sp_opt;
    int sp_m = 0;
    add_config(sp, &sp_config);
    sp->add_option("--complex", sp_complex, "generator spec or mesh path");
    sp->add_option("--m", sp_m, "spectral truncation override");
    sp->add_option("-k,--degree", sp_opt.degree, "cochain degree");
    sp->add_option("--modes", sp_opt.modes, "eigenpairs to export");
    sp->add_option("-o,--out", sp_opt.out, "output path (default stdout)");
    sp->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(sp_config);
        if (sp->count("--complex")) cfg.complex_spec = sp_complex;
        if (sp->count("--m")) cfg.m = sp_m;
        rc = hsdop::cli::cmd_spectrum(cfg, sp_opt);
    });

    // decompose
    auto* de = app.add_subcommand(
        "decompose", "split a cochain into exact, coexact, harmonic parts");
    std::string de_config, de_complex;
    hsdop::cli::DecomposeOptions de_opt;
    add_config(de, &de_config);
    de->add_option("cochain", de_opt.cochain_path, "cochain JSON file")
        ->required();
    de->add_option("--complex", de_complex, "generator spec or mesh path");
    de->add_option("-o,--out", de_opt.out_dir, "output directory");
    de->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(de_config);
        if (de->count("--complex")) cfg.complex_spec = de_complex;
        rc = hsdop::cli::cmd_decompose(cfg, de_opt);
    });

    // gen-data
    auto* gd = app.add_subcommand("gen-data",
                                  "generate and save a task dataset");
    std::string gd_config, gd_task, gd_complex;
    hsdop::cli::GenDataOptions gd_opt;
    int gd_n = 0, gd_low = 0;
    std::uint64_t gd_seed = 0;
    double gd_noise = 0.0;
    bool gd_harm = false;
    add_config(gd, &gd_config);
    gd->add_option("--task", gd_task,
                   "toroidal_transport | poisson_field | harmonic_recovery");
    gd->add_option("--complex", gd_complex, "torus_grid(nx,ny) spec");
    gd->add_option("-n,--n-samples", gd_n, "sample count");
    gd->add_option("--data-seed", gd_seed, "generation seed");
    gd->add_option("--noise", gd_noise, "noise scale");
    gd->add_option("--low-modes", gd_low, "low-frequency mode cutoff");
    gd->add_flag("--with-harmonic", gd_harm, "add a harmonic component");
    gd->add_option("--refine", gd_opt.refine,
                   "regenerate on a grid scaled by this factor");
    gd->add_option("-o,--out", gd_opt.out_dir, "output directory");
    gd->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(gd_config);
        if (gd->count("--task")) cfg.task = gd_task;
        if (gd->count("--complex")) cfg.complex_spec = gd_complex;
        if (gd->count("--n-samples")) cfg.n_samples = gd_n;
        if (gd->count("--data-seed")) cfg.data_seed = gd_seed;
        if (gd->count("--noise")) cfg.noise_scale = gd_noise;
        if (gd->count("--low-modes")) cfg.low_modes = gd_low;
        if (gd->count("--with-harmonic")) cfg.with_harmonic = gd_harm;
        rc = hsdop::cli::cmd_gen_data(cfg, gd_opt);
    });

    // train
    auto* tr = app.add_subcommand("train", "fit a model and checkpoint it");
    std::string tr_config, tr_task, tr_complex, tr_variant;
    hsdop::cli::TrainOptions tr_opt;
    int tr_m = 0, tr_epochs = 0, tr_batch = 0;
    double tr_lr = 0.0, tr_wd = 0.0;
    std::uint64_t tr_seed = 0;
    add_config(tr, &tr_config);
    tr->add_option("--data", tr_opt.data_dir,
                   "dataset directory (default: generate from config)");
    tr->add_option("--task", tr_task, "task name");
    tr->add_option("--complex", tr_complex, "torus_grid(nx,ny) spec");
    tr->add_option("--m", tr_m, "spectral truncation");
    tr->add_option("--epochs", tr_epochs, "training epochs");
    tr->add_option("--lr", tr_lr, "peak learning rate");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--wd", tr_wd, "weight decay");
    tr->add_option("--seed", tr_seed, "training seed");
    tr->add_option("--variant", tr_variant,
                   "full | no_corrector | no_projection");
    tr->add_option("-o,--out", tr_opt.out_dir, "output directory");
    tr->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(tr_config);
        if (tr->count("--task")) cfg.task = tr_task;
        if (tr->count("--complex")) cfg.complex_spec = tr_complex;
        if (tr->count("--m")) cfg.m = tr_m;
        if (tr->count("--epochs")) cfg.epochs = tr_epochs;
        if (tr->count("--lr")) cfg.lr = tr_lr;
        if (tr->count("--batch")) cfg.batch = tr_batch;
        if (tr->count("--wd")) cfg.weight_decay = tr_wd;
        if (tr->count("--seed")) cfg.train_seed = tr_seed;
        if (tr->count("--variant")) cfg.variant = tr_variant;
        rc = hsdop::cli::cmd_train(cfg, tr_opt);
    });

    // eval
    auto* ev = app.add_subcommand("eval",
                                  "evaluate a checkpoint on a dataset split");
    std::string ev_config;
    hsdop::cli::EvalOptions ev_opt;
    add_config(ev, &ev_config);
    ev->add_option("--data", ev_opt.data_dir, "dataset directory")
        ->required();
    ev->add_option("--checkpoint", ev_opt.checkpoint,
                   "checkpoint prefix (.json/.bin pair)")
        ->required();
    ev->add_option("--split", ev_opt.split, "train | val | test");
    ev->add_option("-o,--out", ev_opt.out, "report path");
    ev->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(ev_config);
        rc = hsdop::cli::cmd_eval(cfg, ev_opt);
    });

    // spectral-energy
    auto* se = app.add_subcommand(
        "spectral-energy",
        "per-mode energy CSV of predictions against targets");
    std::string se_config;
    hsdop::cli::SpectralEnergyOptions se_opt;
    int se_m = 0;
    add_config(se, &se_config);
    se->add_option("--data", se_opt.data_dir, "dataset directory")
        ->required();
    se->add_option("--checkpoint", se_opt.checkpoint,
                   "checkpoint prefix (omit for dataset pass-through)");
    se->add_option("--split", se_opt.split, "train | val | test");
    se->add_option("--m", se_m, "spectral truncation for pass-through");
    se->add_option("-o,--out", se_opt.out, "CSV path");
    se->callback([&]() {
        RunConfig cfg = hsdop::cli::load_run_config(se_config);
        if (se->count("--m")) cfg.m = se_m;
        rc = hsdop::cli::cmd_spectral_energy(cfg, se_opt);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const hsdop::ConvergenceFailure& e) {
        return fail(3, e.what());
    } catch (const hsdop::CflViolation& e) {
        return fail(3, e.what());
    } catch (const hsdop::SolverFailure& e) {
        return fail(3, e.what());
    } catch (const hsdop::SingularSystem& e) {
        return fail(3, e.what());
    } catch (const hsdop::NonFiniteLoss& e) {
        return fail(3, e.what());
    } catch (const hsdop::ConfigError& e) {
        return fail(1, e.what());
    } catch (const hsdop::IoError& e) {
        return fail(1, e.what());
    } catch (const hsdop::Error& e) {
        return fail(2, e.what());
    } catch (const std::exception& e) {
        return fail(2, e.what());
    }
    return rc;
}
