/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: tools/audioear.cpp
 *
 * Copyright 2026 The audioear authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "audioear/pipeline/commands.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <iostream>

namespace pipeline = audioear::pipeline;

int main(int argc, char** argv)
{
    CLI::App app{"audioear: ear reconstruction, stitching and HRTF simulation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string out_dir = "out";
    int verbose = 0;
    app.add_option("--config", config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for every seeded stage (overrides the config)");
    app.add_option("--workers", workers, "Concurrent samples")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", out_dir, "Output directory");
    app.add_flag("-v,--verbose", verbose, "More logging (repeatable)");

    auto* make_model = app.add_subcommand("make-model", "Write the built-in stand-in shape and texture models");

    auto* datagen = app.add_subcommand("datagen", "Render synthetic samples from random latent codes");
    std::optional<int> count;
    datagen->add_option("--count", count, "Number of samples (overrides the config)")->check(CLI::NonNegativeNumber);

    auto* fit = app.add_subcommand("fit", "Fit the shape model to landmark files");
    std::string fit_inputs;
    fit->add_option("--inputs", fit_inputs, "Directory of landmark files")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Register predictions to scans and report S2M in mm");
    std::string predictions, scans;
    evaluate->add_option("--predictions", predictions, "Directory of predicted meshes")->required();
    evaluate->add_option("--scans", scans, "Directory of PLY scans")->required();

    auto* stitch_cmd = app.add_subcommand("stitch", "Stitch an ear mesh into a head/body mesh");
    std::string ear, body;
    stitch_cmd->add_option("--ear", ear, "Ear mesh (one boundary loop)")->required()->check(CLI::ExistingFile);
    stitch_cmd->add_option("--body", body, "Body mesh with the ear hole")->required()->check(CLI::ExistingFile);

    auto* simulate = app.add_subcommand("simulate", "Simulate horizontal-plane HRTF SPL in dB");
    std::string mesh, receiver;
    simulate->add_option("--mesh", mesh, "Closed mesh")->required()->check(CLI::ExistingFile);
    simulate->add_option("--receiver", receiver, "Receiver x,y,z in mesh units")->required();

    auto* compare = app.add_subcommand("compare", "SPL error (dB and dB x10) between HRTF results");
    std::vector<std::string> preds, truths, ids;
    compare->add_option("--prediction", preds, "Predicted hrtf.json (repeatable)")->required();
    compare->add_option("--ground-truth", truths, "Ground-truth hrtf.json, one per prediction")->required();
    compare->add_option("--id", ids, "Sample names, one per prediction");

    CLI11_PARSE(app, argc, argv);

    auto log = spdlog::stderr_color_mt("audioear");
    log->set_pattern("[%l] %v");
    log->set_level(verbose >= 2 ? spdlog::level::trace : verbose == 1 ? spdlog::level::debug : spdlog::level::info);

    pipeline::Context ctx;
    ctx.log = log;
    try
    {
        if (!config_path.empty())
        {
            ctx.config = pipeline::load_pipeline_config(config_path);
        }
        pipeline::apply_seed(ctx.config, seed.value_or(ctx.config.seed));
        ctx.config.workers = workers;
        ctx.config.out_dir = out_dir;
        ctx.config.verbosity = verbose;
        if (count)
        {
            ctx.config.datagen.count = *count;
        }
    } catch (const std::exception& e)
    {
        log->error("config: {}", e.what());
        return 1;
    }
    omp_set_num_threads(workers);

    if (*make_model) return pipeline::cmd_make_model(ctx);
    if (*datagen) return pipeline::cmd_datagen(ctx);
    if (*fit) return pipeline::cmd_fit(ctx, fit_inputs);
    if (*evaluate) return pipeline::cmd_evaluate(ctx, predictions, scans);
    if (*stitch_cmd) return pipeline::cmd_stitch(ctx, ear, body);
    if (*simulate)
    {
        audioear::core::Vec3 r;
        try
        {
            r = pipeline::parse_vec3(receiver);
        } catch (const std::exception& e)
        {
            log->error("simulate: --receiver: {}", e.what());
            return 1;
        }
        return pipeline::cmd_simulate(ctx, mesh, r);
    }
    if (*compare)
    {
        if (truths.size() != preds.size() || (!ids.empty() && ids.size() != preds.size()))
        {
            log->error("compare: need one --ground-truth (and --id, if given) per --prediction");
            return 1;
        }
        std::vector<pipeline::ComparePair> pairs;
        for (std::size_t i = 0; i < preds.size(); ++i)
        {
            const std::string id = ids.empty() ? "sample_" + std::to_string(i) : ids[i];
            pairs.push_back({id, preds[i], truths[i]});
        }
        return pipeline::cmd_compare(ctx, pairs);
    }
    return 1;
}
