#include "defsurf/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace defsurf::io {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string engine_state(const rng::Engine& engine) {
  std::ostringstream out;
  out << engine;
  return out.str();
}

void collect_mlp(const std::string& prefix, const ad::Mlp& mlp,
                 std::vector<std::pair<std::string, Mat>>& tensors) {
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    tensors.emplace_back(prefix + ".w" + std::to_string(i),
                         mlp.weights[i].value());
    tensors.emplace_back(prefix + ".b" + std::to_string(i),
                         mlp.biases[i].value());
  }
}

void restore_mlp(const std::string& prefix, ad::Mlp& mlp,
                 const RawCheckpoint& ckpt) {
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    const Mat* w = ckpt.find(prefix + ".w" + std::to_string(i));
    const Mat* b = ckpt.find(prefix + ".b" + std::to_string(i));
    if (!w || !b)
      throw VersionError("checkpoint: missing tensors for " + prefix);
    if (w->rows() != mlp.weights[i].rows() || w->cols() != mlp.weights[i].cols())
      throw VersionError("checkpoint: shape mismatch for " + prefix +
                         " (encoder/architecture mismatch)");
    mlp.weights[i].raw_value() = *w;
    mlp.biases[i].raw_value() = *b;
  }
}

void collect_adam(const std::string& group, const ad::Adam& adam,
                  nlohmann::json& adam_json,
                  std::vector<std::pair<std::string, Mat>>& tensors) {
  adam_json.push_back({{"group", group},
                       {"step_count", adam.step_count()},
                       {"lr", static_cast<double>(adam.learning_rate())}});
  const auto& m = adam.first_moments();
  const auto& v = adam.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    tensors.emplace_back("adam." + group + ".m" + std::to_string(i), m[i]);
    tensors.emplace_back("adam." + group + ".v" + std::to_string(i), v[i]);
  }
}

}  // namespace

const Mat* RawCheckpoint::find(const std::string& name) const {
  for (const auto& [tensor_name, value] : tensors)
    if (tensor_name == name) return &value;
  return nullptr;
}

void write_checkpoint_file(const std::filesystem::path& path,
                           const RawCheckpoint& checkpoint) {
  nlohmann::json header = checkpoint.header;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, value] : checkpoint.tensors)
    manifest.push_back({{"name", name},
                        {"rows", static_cast<long>(value.rows())},
                        {"cols", static_cast<long>(value.cols())}});
  header["tensors"] = manifest;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("write_checkpoint_file: cannot open " + path.string());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_len));
  for (const auto& [name, value] : checkpoint.tensors) {
    for (Index c = 0; c < value.cols(); ++c)
      for (Index r = 0; r < value.rows(); ++r) {
        const double v = static_cast<double>(value(r, c));
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  if (!out)
    throw IoError("write_checkpoint_file: write failed " + path.string());
}

RawCheckpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_checkpoint_file: cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw VersionError("read_checkpoint_file: bad magic in " + path.string());
  if (version != kVersion)
    throw VersionError("read_checkpoint_file: unsupported version " +
                       std::to_string(version));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in)
    throw IoError("read_checkpoint_file: truncated header in " + path.string());

  RawCheckpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw VersionError(std::string("read_checkpoint_file: corrupt header: ") +
                       e.what());
  }
  for (const auto& entry : ckpt.header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Index rows = entry.at("rows").get<long>();
    const Index cols = entry.at("cols").get<long>();
    Mat value(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        value(r, c) = static_cast<Real>(v);
      }
    ckpt.tensors.emplace_back(name, std::move(value));
  }
  if (!in)
    throw IoError("read_checkpoint_file: truncated payload in " + path.string());
  return ckpt;
}

void save_training_checkpoint(const std::filesystem::path& path,
                              const train::TrainConfig& config,
                              const fields::DeformationField& field,
                              const render::ShaderPair& shaders,
                              const std::optional<ad::Adam>& adam_coarse,
                              const std::optional<ad::Adam>& adam_fine,
                              const rng::Engine& view_rng,
                              const rng::Engine& pixel_rng, long iteration,
                              double delta) {
  RawCheckpoint ckpt;
  ckpt.header["config"] = config.to_json();
  ckpt.header["iteration"] = iteration;
  ckpt.header["delta"] = delta;
  ckpt.header["coarse_frozen"] = field.coarse_frozen();
  ckpt.header["rng"] = {{"views", engine_state(view_rng)},
                        {"pixels", engine_state(pixel_rng)}};

  if (!field.config().no_coarse)
    collect_mlp("coarse", field.coarse_net(), ckpt.tensors);
  collect_mlp("fine", field.fine_net(), ckpt.tensors);
  collect_mlp("hz", shaders.feature_shader, ckpt.tensors);
  collect_mlp("hg", shaders.geometry_shader, ckpt.tensors);

  nlohmann::json adam_json = nlohmann::json::array();
  if (adam_coarse) collect_adam("coarse", *adam_coarse, adam_json, ckpt.tensors);
  if (adam_fine) collect_adam("fine", *adam_fine, adam_json, ckpt.tensors);
  ckpt.header["adam"] = adam_json;

  write_checkpoint_file(path, ckpt);
}

LoadedModel load_model(const std::filesystem::path& path,
                       const std::filesystem::path& cache_dir) {
  const RawCheckpoint ckpt = read_checkpoint_file(path);
  LoadedModel loaded;
  loaded.config = train::TrainConfig::from_json(ckpt.header.at("config"));
  loaded.iteration = ckpt.header.value("iteration", 0L);
  loaded.delta = ckpt.header.value("delta", 0.0);

  const std::filesystem::path cache =
      !cache_dir.empty() ? cache_dir
                         : std::filesystem::path(loaded.config.cache_dir);
  loaded.model = train::build_model(loaded.config, cache);

  if (!loaded.config.ablation.no_coarse)
    restore_mlp("coarse", loaded.model.field->coarse_net(), ckpt);
  restore_mlp("fine", loaded.model.field->fine_net(), ckpt);
  restore_mlp("hz", loaded.model.shaders->feature_shader, ckpt);
  restore_mlp("hg", loaded.model.shaders->geometry_shader, ckpt);
  if (ckpt.header.value("coarse_frozen", false))
    loaded.model.field->freeze_coarse();
  return loaded;
}

}  // namespace defsurf::io
