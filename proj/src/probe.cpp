#include "conceptprobe/probe.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "conceptprobe/error.hpp"
#include "conceptprobe/hashing.hpp"
#include "parallel.hpp"

namespace cprobe {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "probe blobs assume a little-endian host");

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Matrix difference_vectors(const ConceptSpec& spec, std::span<const TextRecord> probes,
                          Provider& provider) {
  if (probes.empty()) throw UsageError("difference_vectors: empty probing set");
  const auto d = static_cast<Eigen::Index>(provider.info().hidden_dim);
  Matrix diffs(static_cast<Eigen::Index>(probes.size()), d);
  detail::parallel_for(
      probes.size(), provider.max_concurrency(),
      [&](std::size_t i) {
        const auto pos = provider.hidden_state(spec, PromptRole::positive, probes[i].text);
        const auto neg = provider.hidden_state(spec, PromptRole::negative, probes[i].text);
        const auto row = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < d; ++j)
          diffs(row, j) = pos.values[static_cast<std::size_t>(j)] - neg.values[static_cast<std::size_t>(j)];
      },
      [&](std::size_t i) { return "record " + probes[i].id; });
  return diffs;
}

ConceptFit fit_concept_vector(const Matrix& diffs) {
  ConceptFit fit;
  fit.standardizer = fit_standardizer(diffs);
  const Matrix z = apply_standardizer_rows(fit.standardizer, diffs);
  auto pca = pca_first_component(z, std::min<std::size_t>(static_cast<std::size_t>(diffs.rows()), 10));
  fit.component = std::move(pca.component);
  fit.explained_ratios = std::move(pca.explained_ratios);
  return fit;
}

double concept_projection(const Vector& concept_vector, const Standardizer& standardizer,
                          const HiddenState& state) {
  return project(concept_vector, apply_standardizer(standardizer, to_vector(state.values)));
}

int orient(const Vector& component, const Standardizer& standardizer, const ConceptSpec& spec,
           Provider& provider) {
  switch (spec.orientation) {
    case Orientation::manual_positive: return 1;
    case Orientation::manual_flip: return -1;
    case Orientation::auto_anchors: break;
  }
  if (!spec.anchors) throw ConfigError("orientation auto_anchors needs anchor texts");
  const double pos = concept_projection(
      component, standardizer,
      provider.hidden_state(spec, PromptRole::unified, spec.anchors->positive_text));
  const double neg = concept_projection(
      component, standardizer,
      provider.hidden_state(spec, PromptRole::unified, spec.anchors->negative_text));
  if (pos == neg)
    throw ConfigError("anchor texts project to the same value (" + std::to_string(pos) +
                      "); set orientation to manual_positive or manual_flip");
  return pos > neg ? 1 : -1;
}

ProbeResult run_probe(const ConceptSpec& spec, std::span<const TextRecord> probes,
                      Provider& provider, std::uint64_t seed) {
  if (auto problems = validate_spec(spec); !problems.empty())
    throw ConfigError("concept '" + spec.name + "': " + problems.front());
  const Matrix diffs = difference_vectors(spec, probes, provider);
  auto fit = fit_concept_vector(diffs);
  ProbeResult r;
  r.orientation_sign = orient(fit.component, fit.standardizer, spec, provider);
  r.concept_vector = fit.component * static_cast<double>(r.orientation_sign);
  r.standardizer = std::move(fit.standardizer);
  r.explained_ratios = std::move(fit.explained_ratios);
  r.flagged_dims = r.standardizer.floored.size();
  if (r.flagged_dims > 0)
    spdlog::info("{} of {} difference-vector dimensions had near-zero spread", r.flagged_dims,
                 r.dim());
  for (const auto& p : probes) r.probe_ids.push_back(p.id);
  r.seed = seed;
  r.model_id = provider.info().model_id;
  r.concept_name = spec.name;
  for (auto role : {PromptRole::positive, PromptRole::negative, PromptRole::unified}) {
    r.prompt_digests[to_string(role)] = template_digest(spec, role).hex();
  }
  return r;
}

ExtremesReport probe_extremes(const ProbeResult& probe, const ConceptSpec& spec,
                              std::span<const TextRecord> probes, Provider& provider,
                              std::size_t k) {
  std::vector<ProjectedText> all(probes.size());
  detail::parallel_for(
      probes.size(), provider.max_concurrency(),
      [&](std::size_t i) {
        const auto h = provider.hidden_state(spec, PromptRole::unified, probes[i].text);
        all[i] = {probes[i].id, probes[i].text, concept_projection(probe.concept_vector, probe.standardizer, h)};
      },
      [&](std::size_t i) { return "record " + probes[i].id; });
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.projection > b.projection; });
  ExtremesReport out;
  const auto m = std::min(k, all.size());
  out.top.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
  out.bottom.assign(all.rbegin(), all.rbegin() + static_cast<std::ptrdiff_t>(m));
  return out;
}

void save_probe(const ProbeResult& probe, const std::filesystem::path& path) {
  const auto d = probe.dim();
  if (probe.standardizer.dim() != d) throw UsageError("probe standardizer dimension mismatch");
  std::string blob(3 * d * sizeof(double), '\0');
  auto put = [&](const Vector& v, std::size_t slot) {
    std::memcpy(blob.data() + slot * d * sizeof(double), v.data(), d * sizeof(double));
  };
  put(probe.concept_vector, 0);
  put(probe.standardizer.mean, 1);
  put(probe.standardizer.std, 2);

  json meta{{"format", kProbeFormat},
            {"concept_name", probe.concept_name},
            {"model_id", probe.model_id},
            {"dim", d},
            {"seed", probe.seed},
            {"orientation_sign", probe.orientation_sign},
            {"explained_ratios", probe.explained_ratios},
            {"flagged_dims", probe.flagged_dims},
            {"floored", probe.standardizer.floored},
            {"epsilon_floor", probe.standardizer.epsilon_floor},
            {"probe_ids", probe.probe_ids},
            {"prompt_digests", probe.prompt_digests},
            {"blob", path.filename().string() + ".bin"},
            {"blob_sha256", sha256(blob).hex()}};

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto bin_path = path;
  bin_path += ".bin";
  {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("cannot write " + bin_path.string());
  }
  std::ofstream out(path, std::ios::trunc);
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

ProbeResult load_probe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open probe file " + path.string());
  json meta = json::parse(in, nullptr, false);
  if (meta.is_discarded() || !meta.is_object())
    throw DataError(path.string() + ": probe metadata is not a JSON object");
  if (meta.value("format", "") != kProbeFormat)
    throw DataError(path.string() + ": unsupported probe format '" + meta.value("format", "") + "'");
  ProbeResult r;
  try {
    const auto d = meta.at("dim").get<std::size_t>();
    auto bin_path = path.parent_path() / meta.at("blob").get<std::string>();
    const auto blob = read_file_bytes(bin_path.string());
    if (blob.size() != 3 * d * sizeof(double))
      throw DataError(bin_path.string() + ": expected " + std::to_string(3 * d * sizeof(double)) +
                      " bytes, found " + std::to_string(blob.size()));
    if (sha256(blob).hex() != meta.at("blob_sha256").get<std::string>())
      throw DataError(bin_path.string() + ": checksum mismatch");
    auto take = [&](std::size_t slot) {
      Vector v(static_cast<Eigen::Index>(d));
      std::memcpy(v.data(), blob.data() + slot * d * sizeof(double), d * sizeof(double));
      return v;
    };
    r.concept_vector = take(0);
    r.standardizer.mean = take(1);
    r.standardizer.std = take(2);
    r.standardizer.epsilon_floor = meta.value("epsilon_floor", kStdFloor);
    r.standardizer.floored = meta.value("floored", std::vector<std::size_t>{});
    r.concept_name = meta.value("concept_name", "");
    r.model_id = meta.value("model_id", "");
    r.seed = meta.value("seed", std::uint64_t{0});
    r.orientation_sign = meta.at("orientation_sign").get<int>();
    r.explained_ratios = meta.value("explained_ratios", std::vector<double>{});
    r.flagged_dims = meta.value("flagged_dims", std::size_t{0});
    r.probe_ids = meta.value("probe_ids", std::vector<std::string>{});
    r.prompt_digests = meta.value("prompt_digests", std::map<std::string, std::string>{});
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed probe metadata: " + e.what());
  }
  if (r.orientation_sign != 1 && r.orientation_sign != -1)
    throw DataError(path.string() + ": orientation_sign must be +1 or -1");
  if (std::abs(r.concept_vector.norm() - 1.0) > 1e-10)
    throw DataError(path.string() + ": concept vector is not unit length");
  return r;
}

}  // namespace cprobe
