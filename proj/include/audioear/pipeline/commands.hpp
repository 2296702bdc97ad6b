/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/pipeline/commands.hpp
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

#pragma once

#ifndef AUDIOEAR_PIPELINE_COMMANDS_HPP
#define AUDIOEAR_PIPELINE_COMMANDS_HPP

#include "audioear/acoustics/hrtf.hpp"
#include "audioear/core/image_io.hpp"
#include "audioear/core/mesh_io.hpp"
#include "audioear/fitting/fit.hpp"
#include "audioear/loss/landmarks.hpp"
#include "audioear/loss/losses.hpp"
#include "audioear/morphable/model_io.hpp"
#include "audioear/morphable/standin.hpp"
#include "audioear/pipeline/manifest.hpp"
#include "audioear/pipeline/synthetic.hpp"
#include "audioear/registration/registration.hpp"
#include "audioear/stitch/stitch.hpp"

#include "json.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace pipeline {

namespace fs = std::filesystem;
using core::Vec2;
using core::Vec3;

inline constexpr const char* model_dir_env = "AUDIOEAR_MODEL_DIR";
inline constexpr const char* shape_model_file = "shape_model.bin";
inline constexpr const char* texture_model_file = "texture_model.bin";

/// Bad or inconsistent inputs, reported item by item.
class InputError : public std::runtime_error
{
public:
    InputError(const std::string& what, std::vector<std::string> items)
        : std::runtime_error(what), items_(std::move(items))
    {
    }
    const std::vector<std::string>& items() const noexcept { return items_; }

private:
    std::vector<std::string> items_;
};

/// An error raised inside a named pipeline stage.
class StageError : public std::runtime_error
{
public:
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("stage " + stage + ": " + what), stage_(stage)
    {
    }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct DatagenConfig
{
    int count = 10;
    int width = 256;
    int height = 256;
    double shape_sigma = 0.5;
    double texture_sigma = 0.5;
};

struct PipelineConfig
{
    fs::path shape_model;   ///< empty: $AUDIOEAR_MODEL_DIR/shape_model.bin
    fs::path texture_model; ///< empty: $AUDIOEAR_MODEL_DIR/texture_model.bin
    fs::path out_dir = "out";
    std::uint64_t seed = 0;
    int workers = 1;
    int verbosity = 0;
    DatagenConfig datagen;
    fitting::FitConfig fit;
    bool fit_batch = false;
    registration::RegistrationConfig registration;
    std::map<std::string, registration::Laterality> laterality; ///< evaluate: per sample, default right
    stitch::StitchConfig stitch;
    bool stitch_auto_place = false;
    acoustics::HrtfConfig hrtf;
    std::string mesh_units = "mm"; ///< simulate: units of the input mesh and receiver
    morphable::StandinOptions standin;
};

inline double units_to_metres(const std::string& units)
{
    if (units == "mm") return acoustics::metres_per_millimetre;
    if (units == "m") return 1.0;
    throw std::invalid_argument("mesh_units must be 'mm' or 'm', got '" + units + "'");
}

inline nlohmann::json to_json(const PipelineConfig& c)
{
    nlohmann::json lat = nlohmann::json::object();
    for (const auto& [id, l] : c.laterality)
    {
        lat[id] = registration::to_string(l);
    }
    return {{"models", {{"shape", c.shape_model.generic_string()}, {"texture", c.texture_model.generic_string()}}},
            {"seed", c.seed},
            {"datagen",
             {{"count", c.datagen.count},
              {"width", c.datagen.width},
              {"height", c.datagen.height},
              {"shape_sigma", c.datagen.shape_sigma},
              {"texture_sigma", c.datagen.texture_sigma}}},
            {"fit", {{"config", fitting::to_json(c.fit)}, {"batch", c.fit_batch}}},
            {"evaluate", {{"registration", registration::to_json(c.registration)}, {"laterality", lat}}},
            {"stitch", {{"config", stitch::to_json(c.stitch)}, {"auto_place", c.stitch_auto_place}}},
            {"simulate", {{"hrtf", acoustics::to_json(c.hrtf)}, {"mesh_units", c.mesh_units}}},
            {"standin",
             {{"rings", c.standin.rings},
              {"segments", c.standin.segments},
              {"components", c.standin.components},
              {"training_shapes", c.standin.training_shapes}}}};
}

/// Missing keys keep their defaults. Output directory, workers and verbosity come from the command line.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j)
{
    PipelineConfig c;
    if (j.contains("models"))
    {
        const auto& m = j.at("models");
        c.shape_model = m.value("shape", std::string());
        c.texture_model = m.value("texture", std::string());
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("datagen"))
    {
        const auto& d = j.at("datagen");
        c.datagen.count = d.value("count", c.datagen.count);
        c.datagen.width = d.value("width", c.datagen.width);
        c.datagen.height = d.value("height", c.datagen.height);
        c.datagen.shape_sigma = d.value("shape_sigma", c.datagen.shape_sigma);
        c.datagen.texture_sigma = d.value("texture_sigma", c.datagen.texture_sigma);
        if (c.datagen.count < 0 || c.datagen.width < 1 || c.datagen.height < 1 || !(c.datagen.shape_sigma > 0.0) ||
            !(c.datagen.texture_sigma > 0.0))
        {
            throw std::invalid_argument("datagen config: count >= 0, positive image size and sigmas required");
        }
    }
    if (j.contains("fit"))
    {
        const auto& f = j.at("fit");
        if (f.contains("config")) c.fit = fitting::fit_config_from_json(f.at("config"));
        c.fit_batch = f.value("batch", c.fit_batch);
    }
    if (j.contains("evaluate"))
    {
        const auto& e = j.at("evaluate");
        if (e.contains("registration")) c.registration = registration::registration_config_from_json(e.at("registration"));
        if (e.contains("laterality"))
        {
            for (const auto& [id, l] : e.at("laterality").items())
            {
                c.laterality[id] = registration::laterality_from_string(l.get<std::string>());
            }
        }
    }
    if (j.contains("stitch"))
    {
        const auto& s = j.at("stitch");
        if (s.contains("config")) c.stitch = stitch::stitch_config_from_json(s.at("config"));
        c.stitch_auto_place = s.value("auto_place", c.stitch_auto_place);
    }
    if (j.contains("simulate"))
    {
        const auto& s = j.at("simulate");
        if (s.contains("hrtf")) c.hrtf = acoustics::hrtf_config_from_json(s.at("hrtf"));
        c.mesh_units = s.value("mesh_units", c.mesh_units);
        units_to_metres(c.mesh_units);
    }
    if (j.contains("standin"))
    {
        const auto& s = j.at("standin");
        c.standin.rings = s.value("rings", c.standin.rings);
        c.standin.segments = s.value("segments", c.standin.segments);
        c.standin.components = s.value("components", c.standin.components);
        c.standin.training_shapes = s.value("training_shapes", c.standin.training_shapes);
    }
    return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open config " + path.string());
    }
    try
    {
        return pipeline_config_from_json(nlohmann::json::parse(in));
    } catch (const std::exception& e)
    {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

/// Makes the global seed the seed of every seeded stage.
inline void apply_seed(PipelineConfig& c, std::uint64_t seed)
{
    c.seed = seed;
    c.fit.seed = seed;
    c.registration.seed = seed;
}

struct Context
{
    PipelineConfig config;
    std::shared_ptr<spdlog::logger> log;
};

// ---------------------------------------------------------------- serialization helpers

inline nlohmann::json to_json(const render::CameraParams& c)
{
    return {{"scale", c.scale},
            {"rotation", {c.rotation.x(), c.rotation.y(), c.rotation.z()}},
            {"translation", {c.translation.x(), c.translation.y()}}};
}

inline render::CameraParams camera_from_json(const nlohmann::json& j)
{
    render::CameraParams c;
    c.scale = j.at("scale").get<double>();
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (r.size() != 3 || t.size() != 2)
    {
        throw std::invalid_argument("camera: rotation needs 3 angles and translation 2 values");
    }
    c.rotation = Vec3(r[0], r[1], r[2]);
    c.translation = Vec2(t[0], t[1]);
    return c;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json latent_json(const morphable::LatentCode& latent, const render::CameraParams& camera)
{
    return {{"shape", to_vector(latent.shape)}, {"texture", to_vector(latent.texture)}, {"camera", to_json(camera)}};
}

inline nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path.string());
    }
    try
    {
        return nlohmann::json::parse(in);
    } catch (const std::exception& e)
    {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline Vec3 parse_vec3(const std::string& text)
{
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        v.push_back(std::stod(item, &used));
        if (used != item.size())
        {
            throw std::invalid_argument("bad number '" + item + "'");
        }
    }
    if (v.size() != 3)
    {
        throw std::invalid_argument("expected x,y,z, got '" + text + "'");
    }
    return {v[0], v[1], v[2]};
}

// ---------------------------------------------------------------- models

inline fs::path resolve_model(const fs::path& configured, const char* file)
{
    if (!configured.empty())
    {
        return configured;
    }
    const char* dir = std::getenv(model_dir_env);
    if (dir == nullptr || *dir == '\0')
    {
        throw std::runtime_error(std::string("no model configured: set models in the config or ") + model_dir_env);
    }
    return fs::path(dir) / file;
}

inline morphable::EarShapeModel load_shape(const Context& ctx, RunManifest& manifest)
{
    const fs::path p = resolve_model(ctx.config.shape_model, shape_model_file);
    if (!fs::exists(p))
    {
        throw std::runtime_error("missing shape model " + p.string());
    }
    manifest.add_input(p);
    return morphable::load_shape_model(p);
}

inline morphable::TextureModel load_texture(const Context& ctx, RunManifest& manifest)
{
    const fs::path p = resolve_model(ctx.config.texture_model, texture_model_file);
    if (!fs::exists(p))
    {
        throw std::runtime_error("missing texture model " + p.string());
    }
    manifest.add_input(p);
    return morphable::load_texture_model(p);
}

// ---------------------------------------------------------------- runner

/**
 * Runs `body` against a staging area, then writes `<command>_manifest.json`
 * and moves everything into the output directory. Returns the exit code:
 * 0 on success, 1 on any error (nothing is committed then).
 */
inline int run_command(const std::string& command, Context& ctx,
                       const std::function<void(Staging&, RunManifest&)>& body)
{
    auto& log = *ctx.log;
    try
    {
        Staging staging(ctx.config.out_dir);
        RunManifest manifest;
        manifest.command = command;
        manifest.config_sha256 = sha256_hex(to_json(ctx.config).dump());
        body(staging, manifest);
        for (const auto& rel : staging.files())
        {
            manifest.outputs[rel.generic_string()] = sha256_file(staging.path() / rel);
        }
        write_json(staging / (command + "_manifest.json"), to_json(manifest));
        staging.commit();
        log.info("{}: wrote {} files to {}", command, manifest.outputs.size(), ctx.config.out_dir.string());
        return 0;
    } catch (const InputError& e)
    {
        log.error("{}: {}", command, e.what());
        for (const auto& item : e.items())
        {
            log.error("  {}", item);
        }
    } catch (const std::exception& e)
    {
        log.error("{}: {}", command, e.what());
    }
    return 1;
}

/// Times `fn` as a named stage and attributes any exception to it.
template <typename Fn>
auto stage(RunManifest& manifest, const std::string& name, Fn&& fn)
{
    const StageTimer timer;
    try
    {
        if constexpr (std::is_void_v<decltype(fn())>)
        {
            fn();
            manifest.add_stage(name, timer.seconds());
        } else
        {
            auto r = fn();
            manifest.add_stage(name, timer.seconds());
            return r;
        }
    } catch (const InputError&)
    {
        throw;
    } catch (const StageError&)
    {
        throw;
    } catch (const std::exception& e)
    {
        throw StageError(name, e.what());
    }
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; the first error (by index) is rethrown.
template <typename Fn>
void parallel_for(int workers, std::size_t n, Fn&& fn)
{
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    {
        try
        {
            fn(static_cast<std::size_t>(i));
        } catch (const std::exception& e)
        {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
    {
        if (!e.empty())
        {
            throw std::runtime_error(e);
        }
    }
}

inline std::string sample_id(std::size_t i)
{
    std::ostringstream s;
    s << "sample_" << std::setw(5) << std::setfill('0') << i;
    return s.str();
}

// ---------------------------------------------------------------- make-model

/// Writes the built-in stand-in shape and texture models.
inline int cmd_make_model(Context& ctx)
{
    return run_command("make-model", ctx, [&](Staging& out, RunManifest& m) {
        const auto shape = stage(m, "shape", [&] { return morphable::make_standin_shape_model(ctx.config.standin); });
        const auto texture = stage(m, "texture", [&] { return morphable::make_standin_texture_model(); });
        morphable::save_shape_model(shape, out / shape_model_file, "stand-in");
        morphable::save_texture_model(texture, out / texture_model_file, "stand-in");
        ctx.log->info("make-model: {} vertices, {} shape components", shape.num_vertices(), shape.dim());
    });
}

// ---------------------------------------------------------------- datagen

/**
 * Writes `samples/sample_NNNNN/` folders with latent.json (codes and camera),
 * image.png, depth.tiff (rotated-frame z in mm) and landmarks.json.
 */
inline int cmd_datagen(Context& ctx)
{
    return run_command("datagen", ctx, [&](Staging& out, RunManifest& m) {
        const auto& d = ctx.config.datagen;
        const auto shape = stage(m, "load_models", [&] { return load_shape(ctx, m); });
        const auto texture = load_texture(ctx, m);
        const auto latents = morphable::sample_latents(ctx.config.seed, static_cast<std::size_t>(d.count), d.shape_sigma,
                                                       d.texture_sigma, shape.dim(), static_cast<int>(texture.basis.cols()));
        const core::Random camera_root(ctx.config.seed ^ 0x9e3779b97f4a7c15ULL);
        stage(m, "render", [&] {
            parallel_for(ctx.config.workers, latents.size(), [&](std::size_t i) {
                core::Random rng = camera_root.fork(i);
                const auto cam = sample_camera(rng, shape, d.width, d.height);
                const auto s = render_sample(shape, texture, latents[i], cam, d.width, d.height);
                const fs::path dir = out / ("samples/" + sample_id(i));
                fs::create_directories(dir);
                write_json(dir / "latent.json", latent_json(s.latent, s.camera));
                core::save_png(s.image, dir / "image.png");
                core::save_float_tiff(s.depth, dir / "depth.tiff");
                loss::save_landmarks(s.landmarks, dir / "landmarks.json");
            });
        });
        ctx.log->info("datagen: {} samples of {}x{} px (seed {})", latents.size(), d.width, d.height, ctx.config.seed);
    });
}

// ---------------------------------------------------------------- fit

struct LandmarkInput
{
    std::string id;
    fs::path landmarks;
    std::optional<fs::path> image;
};

/**
 * Landmark files under `dir`: every `landmarks.json` (id: its folder's path
 * relative to `dir`, '/' replaced by '_') and every `<id>.landmarks.json`.
 * A sibling `image.png` or `<id>.png` is attached when present. Sorted by id.
 */
inline std::vector<LandmarkInput> find_landmark_inputs(const fs::path& dir)
{
    if (!fs::is_directory(dir))
    {
        throw std::runtime_error("input directory " + dir.string() + " does not exist");
    }
    const std::string suffix = ".landmarks.json";
    std::vector<LandmarkInput> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
    {
        if (!e.is_regular_file())
        {
            continue;
        }
        const std::string name = e.path().filename().string();
        LandmarkInput in;
        in.landmarks = e.path();
        if (name == "landmarks.json")
        {
            std::string id = fs::relative(e.path().parent_path(), dir).generic_string();
            std::replace(id.begin(), id.end(), '/', '_');
            in.id = id == "." ? "input" : id;
            if (fs::exists(e.path().parent_path() / "image.png")) in.image = e.path().parent_path() / "image.png";
        } else if (name.size() > suffix.size() && name.ends_with(suffix))
        {
            in.id = name.substr(0, name.size() - suffix.size());
            const auto png = e.path().parent_path() / (in.id + ".png");
            if (fs::exists(png)) in.image = png;
        } else
        {
            continue;
        }
        out.push_back(std::move(in));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < out.size(); ++i)
    {
        if (out[i].id == out[i - 1].id)
        {
            throw std::runtime_error("two landmark files map to id '" + out[i].id + "'");
        }
    }
    return out;
}

/**
 * Fits every landmark file under `input_dir` and writes `fit/<id>/mesh.obj`
 * and `fit/<id>/result.json`, plus `fit/summary.json`. All files are
 * validated before any fitting starts.
 */
inline int cmd_fit(Context& ctx, const fs::path& input_dir)
{
    return run_command("fit", ctx, [&](Staging& out, RunManifest& m) {
        const auto inputs = stage(m, "scan_inputs", [&] { return find_landmark_inputs(input_dir); });
        if (inputs.empty())
        {
            ctx.log->warn("fit: no landmark files under {}; nothing to do", input_dir.string());
            return;
        }
        std::vector<fitting::FitInput> fit_inputs(inputs.size());
        std::vector<std::string> problems;
        for (std::size_t i = 0; i < inputs.size(); ++i)
        {
            try
            {
                fit_inputs[i].landmarks = loss::load_landmarks(inputs[i].landmarks);
                m.add_input(inputs[i].landmarks);
            } catch (const std::exception& e)
            {
                problems.push_back(e.what());
            }
        }
        if (!problems.empty())
        {
            throw InputError(std::to_string(problems.size()) + " invalid landmark file(s)", problems);
        }
        const auto& cfg = ctx.config.fit;
        const auto shape = stage(m, "load_models", [&] { return load_shape(ctx, m); });
        std::optional<morphable::TextureModel> texture;
        if (cfg.weights.photo > 0.0)
        {
            texture = load_texture(ctx, m);
            for (std::size_t i = 0; i < inputs.size(); ++i)
            {
                if (!inputs[i].image)
                {
                    throw std::runtime_error(inputs[i].id + ": photometric fitting needs an image next to the landmarks");
                }
                fit_inputs[i].image = core::load_png(*inputs[i].image);
                m.add_input(*inputs[i].image);
            }
        }
        const morphable::TextureModel* tex = texture ? &*texture : nullptr;
        std::vector<fitting::FitResult> results(inputs.size());
        stage(m, "fit", [&] {
            try
            {
                if (ctx.config.fit_batch)
                {
                    results = fitting::fit_batch(fit_inputs, shape, tex, cfg);
                } else
                {
                    parallel_for(ctx.config.workers, inputs.size(), [&](std::size_t i) {
                        try
                        {
                            results[i] = fitting::fit_image(fit_inputs[i], shape, tex, cfg);
                        } catch (const std::exception& e)
                        {
                            throw std::runtime_error(inputs[i].id + ": " + e.what());
                        }
                    });
                }
            } catch (const fitting::FitDivergence& e)
            {
                throw std::runtime_error(std::string("diverged: ") + e.what());
            }
        });
        nlohmann::json summary = nlohmann::json::array();
        std::vector<double> losses;
        for (std::size_t i = 0; i < inputs.size(); ++i)
        {
            const auto& r = results[i];
            const auto pred = project_model_landmarks(shape, r.latent.shape, r.camera);
            const double lmk = loss::landmark_loss(pred.points, fit_inputs[i].landmarks);
            const double px = fitting::reprojection_error(r, shape, fit_inputs[i].landmarks);
            losses.push_back(lmk);
            const fs::path dir = out / ("fit/" + inputs[i].id);
            fs::create_directories(dir);
            core::save_mesh(morphable::decode_shape(shape, r.latent.shape), dir / "mesh.obj");
            nlohmann::json j = fitting::to_json(r);
            j["landmark_loss"] = lmk;
            j["reprojection_error_px"] = px;
            write_json(dir / "result.json", j);
            summary.push_back({{"id", inputs[i].id}, {"landmark_loss", lmk}, {"reprojection_error_px", px},
                               {"converged", r.converged}});
            ctx.log->debug("fit: {} landmark_loss {:.3e}, reprojection {:.3f} px", inputs[i].id, lmk, px);
        }
        const double mean = core::pairwise_mean(losses);
        write_json(out / "fit/summary.json", {{"samples", summary}, {"mean_landmark_loss", mean}});
        ctx.log->info("fit: {} inputs, mean final landmark_loss {:.3e} (normalized by bounding-box diagonal)",
                      inputs.size(), mean);
    });
}

// ---------------------------------------------------------------- evaluate

/// Mesh files in `dir` keyed by id: `<id>.obj|ply`, or `<id>/mesh.obj|ply`.
inline std::map<std::string, fs::path> find_meshes(const fs::path& dir, bool point_clouds)
{
    if (!fs::is_directory(dir))
    {
        throw std::runtime_error("directory " + dir.string() + " does not exist");
    }
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
    {
        if (!e.is_regular_file())
        {
            continue;
        }
        const std::string ext = core::detail::lower_extension(e.path());
        if (ext != ".ply" && (point_clouds || ext != ".obj"))
        {
            continue;
        }
        const std::string stem = e.path().stem().string();
        const std::string id = stem == "mesh" && e.path().parent_path() != dir
                                   ? e.path().parent_path().filename().string()
                                   : stem;
        if (!out.emplace(id, e.path()).second)
        {
            throw std::runtime_error("two files in " + dir.string() + " map to id '" + id + "'");
        }
    }
    return out;
}

/**
 * Registers each predicted mesh to the scan with the same id and writes
 * `evaluation.csv` and `evaluation.json`. Scans must be PLY point clouds.
 */
inline int cmd_evaluate(Context& ctx, const fs::path& predictions_dir, const fs::path& scans_dir)
{
    return run_command("evaluate", ctx, [&](Staging& out, RunManifest& m) {
        const auto preds = find_meshes(predictions_dir, false);
        const auto scans = find_meshes(scans_dir, true);
        std::vector<std::string> unpaired;
        for (const auto& [id, p] : preds)
        {
            if (!scans.count(id)) unpaired.push_back(id + ": prediction without scan");
        }
        for (const auto& [id, p] : scans)
        {
            if (!preds.count(id)) unpaired.push_back(id + ": scan without prediction");
        }
        if (!unpaired.empty())
        {
            throw InputError(std::to_string(unpaired.size()) + " unpaired sample(s)", unpaired);
        }
        std::vector<core::TriMesh> meshes;
        std::vector<registration::ScanSample> samples;
        stage(m, "load", [&] {
            for (const auto& [id, p] : preds)
            {
                meshes.push_back(core::load_mesh(p));
                m.add_input(p);
                registration::ScanSample s;
                s.id = id;
                s.scan = core::load_point_cloud(scans.at(id));
                m.add_input(scans.at(id));
                const auto it = ctx.config.laterality.find(id);
                s.laterality = it == ctx.config.laterality.end() ? registration::Laterality::right : it->second;
                samples.push_back(std::move(s));
            }
        });
        const auto report = stage(m, "register", [&] {
            omp_set_num_threads(ctx.config.workers);
            return registration::evaluate_dataset(meshes, samples, ctx.config.registration);
        });
        write_text(out / "evaluation.csv", registration::to_csv(report));
        write_json(out / "evaluation.json", registration::to_json(report));
        ctx.log->info("evaluate: mean S2M {:.4f} mm, median {:.4f} mm over {} samples", report.mean_s2m,
                      report.median_s2m, report.samples.size());
    });
}

// ---------------------------------------------------------------- stitch

/// Writes `stitched.obj` and `stitch_report.json`.
inline int cmd_stitch(Context& ctx, const fs::path& ear_path, const fs::path& body_path)
{
    return run_command("stitch", ctx, [&](Staging& out, RunManifest& m) {
        const auto ear = core::load_mesh(ear_path);
        const auto body = core::load_mesh(body_path);
        m.add_input(ear_path);
        m.add_input(body_path);
        stitch::StitchConfig cfg = ctx.config.stitch;
        if (ctx.config.stitch_auto_place)
        {
            cfg.placement = stage(m, "place", [&] { return stitch::align_loops(ear, body, cfg.hole_loop.value_or(0)); });
        }
        const auto result = stage(m, "stitch", [&] { return stitch::stitch(ear, body, cfg); });
        core::save_mesh(result.mesh, out / "stitched.obj");
        nlohmann::json report = stitch::to_json(result);
        report["placement"] = stitch::to_json(cfg.placement);
        write_json(out / "stitch_report.json", report);
        ctx.log->info("stitch: {} faces, seam min angle {:.2f} deg, {} slivers, {} open edges", result.mesh.faces.size(),
                      result.quality.min_angle, result.quality.sliver_count, result.quality.boundary_edge_count);
    });
}

// ---------------------------------------------------------------- simulate

/**
 * Simulates the horizontal-plane HRTF of a closed mesh for a receiver given
 * in the mesh's units. Writes `hrtf.json` and `hrtf_polar.csv`.
 */
inline int cmd_simulate(Context& ctx, const fs::path& mesh_path, const Vec3& receiver)
{
    return run_command("simulate", ctx, [&](Staging& out, RunManifest& m) {
        const double factor = units_to_metres(ctx.config.mesh_units);
        auto mesh = core::load_mesh(mesh_path);
        m.add_input(mesh_path);
        if (factor != 1.0)
        {
            ctx.log->info("simulate: converting mesh and receiver from {} to m (x{})", ctx.config.mesh_units, factor);
            for (auto& v : mesh.vertices) v *= factor;
        }
        const Vec3 rec = receiver * factor;
        const auto result = stage(m, "bem", [&] { return acoustics::simulate_hrtf(mesh, rec, ctx.config.hrtf); });
        for (const auto& w : result.warnings)
        {
            ctx.log->warn("simulate: {}", w);
        }
        write_json(out / "hrtf.json", acoustics::to_json(result));
        std::ofstream csv(out / "hrtf_polar.csv");
        acoustics::write_polar_csv(csv, acoustics::polar_rows(result));
        csv.close();
        for (std::size_t f = 0; f < result.frequencies.size(); ++f)
        {
            const auto [lo, hi] = std::minmax_element(result.spl[f].begin(), result.spl[f].end());
            ctx.log->info("simulate: {:.1f} Hz SPL range {:.2f} to {:.2f} dB", result.frequencies[f], *lo, *hi);
        }
    });
}

// ---------------------------------------------------------------- compare

struct ComparePair
{
    std::string id;
    fs::path prediction;
    fs::path ground_truth;
};

/// One Table-style row: "<id> <f> Hz: mean ± std dB (mean ± std dB×10)".
inline std::string format_error_row(const std::string& id, const acoustics::SplErrorStats& s)
{
    std::ostringstream o;
    o << std::fixed << std::setprecision(1) << id << "  " << s.frequency << " Hz: " << std::setprecision(3) << s.mean_db
      << " ± " << s.std_db << " dB  (" << std::setprecision(2) << s.mean_db_x10() << " ± " << s.std_db_x10()
      << " dB×10)";
    return o.str();
}

/**
 * Per sample and frequency, mean ± std of |SPL error| over azimuth. Writes
 * `spl_error.csv`, `spl_error.json` and `error_polar/<id>.csv`.
 */
inline int cmd_compare(Context& ctx, const std::vector<ComparePair>& pairs)
{
    return run_command("compare", ctx, [&](Staging& out, RunManifest& m) {
        if (pairs.empty())
        {
            throw std::invalid_argument("compare: no prediction/ground-truth pairs given");
        }
        std::ostringstream csv;
        csv.precision(17);
        csv << "sample_id,frequency_hz,mean_db,std_db,mean_db_x10,std_db_x10\n";
        nlohmann::json report = nlohmann::json::object();
        fs::create_directories(out / "error_polar");
        for (const auto& p : pairs)
        {
            const auto stats = stage(m, "compare:" + p.id, [&] {
                const auto pred = acoustics::hrtf_result_from_json(read_json(p.prediction));
                const auto gt = acoustics::hrtf_result_from_json(read_json(p.ground_truth));
                m.add_input(p.prediction);
                m.add_input(p.ground_truth);
                std::ofstream polar(out / ("error_polar/" + p.id + ".csv"));
                acoustics::write_polar_csv(polar, acoustics::error_polar_rows(pred, gt));
                return acoustics::spl_error(pred, gt);
            });
            for (const auto& s : stats)
            {
                csv << p.id << ',' << s.frequency << ',' << s.mean_db << ',' << s.std_db << ',' << s.mean_db_x10()
                    << ',' << s.std_db_x10() << '\n';
                ctx.log->info("compare: {}", format_error_row(p.id, s));
            }
            report[p.id] = acoustics::to_json(stats);
        }
        write_text(out / "spl_error.csv", csv.str());
        write_json(out / "spl_error.json", report);
    });
}

} /* namespace pipeline */
} /* namespace audioear */

#endif /* AUDIOEAR_PIPELINE_COMMANDS_HPP */
