#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aodfill/ascii_grid.hpp"
#include "aodfill/errors.hpp"
#include "aodfill/features.hpp"
#include "aodfill/forest.hpp"
#include "aodfill/pipeline.hpp"
#include "aodfill/synth.hpp"
#include "config.hpp"

namespace {

using namespace aodfill;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON config file");
    cmd->add_option("overrides", args.overrides,
                    "dotted-path config overrides, e.g. filter.window=11");
}

nlohmann::json config_of(const CommonArgs& args) {
    return cli::load_config(args.config_path, args.overrides);
}

std::map<std::string, ModelPair> load_models(const RunConfig& cfg) {
    const auto dir = cfg.output_root / "models";
    auto one = [&](const std::string& band, const std::string& variant) {
        const auto path = dir / (band + "_" + variant + ".json");
        if (!std::filesystem::exists(path))
            throw InputError("model file " + path.string() +
                             " not found; run the train stage first");
        return load_model_json(path);
    };
    std::map<std::string, ModelPair> models;
    for (const std::string band : {kBand047, kBand055}) {
        ModelPair pair;
        pair.with_filter = one(band, kVariantWith);
        pair.without_filter = one(band, kVariantWithout);
        models.emplace(band, std::move(pair));
    }
    return models;
}

int dispatch(int argc, char** argv) {
    CLI::App app{
        "aodfill: gap-fills daily AOD rasters with a neighbor-mean +"
        " random-forest pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args, features_args, train_args, evaluate_args, impute_args,
        run_args, filter_args, coverage_args;

    auto* synth_cmd = app.add_subcommand(
        "synth",
        "Write a synthetic scene set as a ready-to-run input_root.\n"
        "Config keys: input_root, synth.{n_cols,n_rows,cell_size,"
        "correlation_length,missing_fraction,n_covariates,noise_sd,"
        "n_stations,start_date,days,seed}");
    add_common(synth_cmd, synth_args);

    auto* features_cmd = app.add_subcommand(
        "features",
        "Build the two training tables and write them under output_root/tables.\n"
        "Config keys: input_root, output_root, date_start, date_end, "
        "covariate_tags, station_file, filter.{window,min_valid}, threads, "
        "apply_aod_scale");
    add_common(features_cmd, features_args);

    auto* train_cmd = app.add_subcommand(
        "train",
        "Tune and fit the four models, persisting them under output_root/models.\n"
        "Config keys: those of `features` plus seed, search_iters, cv_k");
    add_common(train_cmd, train_args);

    auto* evaluate_cmd = app.add_subcommand(
        "evaluate",
        "Cross-validate the trained models under all three fold kinds and write "
        "output_root/reports/eval.{json,csv}.\n"
        "Config keys: those of `train`; requires persisted models");
    add_common(evaluate_cmd, evaluate_args);

    auto* impute_cmd = app.add_subcommand(
        "impute",
        "Write full-coverage grids (plus provenance) for every day in range "
        "under output_root/imputed.\n"
        "Config keys: those of `train`; requires persisted models");
    add_common(impute_cmd, impute_args);

    auto* run_cmd = app.add_subcommand(
        "run",
        "Full pipeline: tables, models, evaluation, imputation, manifest.\n"
        "Config keys: input_root, output_root, date_start, date_end, "
        "covariate_tags, station_file, filter.{window,min_valid}, seed, "
        "search_iters, cv_k, threads, apply_aod_scale");
    add_common(run_cmd, run_args);

    std::string filter_input, filter_output;
    auto* filter_cmd = app.add_subcommand(
        "filter",
        "Apply the nodata-aware mean filter to one ASCII grid.\n"
        "Config keys: filter.{window,include_center,min_valid} "
        "(include_center defaults to true here), threads");
    filter_cmd->add_option("input", filter_input, "input .asc grid")->required();
    filter_cmd->add_option("output", filter_output, "output .asc grid")->required();
    add_common(filter_cmd, filter_args);

    std::string coverage_input;
    auto* coverage_cmd = app.add_subcommand(
        "coverage", "Print the valid-cell fraction of an ASCII grid to stdout.");
    coverage_cmd->add_option("input", coverage_input, "input .asc grid")->required();
    add_common(coverage_cmd, coverage_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth_cmd->parsed()) {
            const auto j = config_of(synth_args);
            const cli::SynthConfig synth = cli::parse_synth_config(j);
            if (!j.contains("input_root"))
                throw ConfigError("missing config key 'input_root'");
            write_scene_set(synth.scene, synth.days,
                            j.at("input_root").get<std::string>());
        } else if (features_cmd->parsed()) {
            const RunConfig cfg = cli::parse_run_config(config_of(features_args));
            const Tables tables = build_tables(cfg);
            std::filesystem::create_directories(cfg.output_root / "tables");
            write_sample_table_csv(tables.with_filter,
                                   cfg.output_root / "tables" / "table_with_filter.csv");
            write_sample_table_csv(
                tables.without_filter,
                cfg.output_root / "tables" / "table_without_filter.csv");
        } else if (train_cmd->parsed()) {
            const RunConfig cfg = cli::parse_run_config(config_of(train_args));
            const Tables tables = build_tables(cfg);
            train_models(tables, cfg);
        } else if (evaluate_cmd->parsed()) {
            const RunConfig cfg = cli::parse_run_config(config_of(evaluate_args));
            const Tables tables = build_tables(cfg);
            evaluate_all(tables, load_models(cfg), cfg);
        } else if (impute_cmd->parsed()) {
            const RunConfig cfg = cli::parse_run_config(config_of(impute_args));
            const auto models = load_models(cfg);
            std::filesystem::create_directories(cfg.output_root / "imputed");
            for (DateStamp day = cfg.date_start; day <= cfg.date_end;
                 day = day.next_day()) {
                const ImputedDay imputed = impute_day(day, cfg, models);
                const auto out_dir = cfg.output_root / "imputed";
                const std::string suffix = "_" + day.to_string() + ".asc";
                write_ascii_grid(imputed.aod047, out_dir / (kBand047 + suffix));
                write_ascii_grid(imputed.aod055, out_dir / (kBand055 + suffix));
                write_ascii_grid(imputed.provenance_047,
                                 out_dir / ("provenance_" + std::string(kBand047) + suffix));
                write_ascii_grid(imputed.provenance_055,
                                 out_dir / ("provenance_" + std::string(kBand055) + suffix));
            }
        } else if (run_cmd->parsed()) {
            run(cli::parse_run_config(config_of(run_args)));
        } else if (filter_cmd->parsed()) {
            const auto j = config_of(filter_args);
            const FilterConfig fc = cli::parse_filter_config(j, true);
            const Grid g = read_ascii_grid(filter_input);
            write_ascii_grid(mean_filter(g, fc, cli::parse_threads(j)), filter_output);
        } else if (coverage_cmd->parsed()) {
            config_of(coverage_args); // validates override syntax
            const Grid g = read_ascii_grid(coverage_input);
            std::printf("%.6f\n", coverage(g));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
