#include "histoprism/checkpoint.hpp"

#include <json.hpp>

#include "binio.hpp"

namespace histoprism {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kCheckpointMagic[] = "HPCK0001";

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["d_img"] = c.d_img;
  j["d_gene"] = c.d_gene;
  j["d_onco"] = c.d_onco;
  j["d_hidden"] = c.d_hidden;
  j["n_cross_layers"] = c.n_cross_layers;
  j["n_cross_heads"] = c.n_cross_heads;
  j["n_enc_layers"] = c.n_enc_layers;
  j["n_enc_heads"] = c.n_enc_heads;
  j["use_positional_encoding"] = c.use_positional_encoding;
  j["use_cross_attention"] = c.use_cross_attention;
  j["use_cross_residual"] = c.use_cross_residual;
  j["layer_norm_eps"] = c.layer_norm_eps;
  return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig c;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("d_img", c.d_img);
  opt("d_gene", c.d_gene);
  opt("d_onco", c.d_onco);
  opt("d_hidden", c.d_hidden);
  opt("n_cross_layers", c.n_cross_layers);
  opt("n_cross_heads", c.n_cross_heads);
  opt("n_enc_layers", c.n_enc_layers);
  opt("n_enc_heads", c.n_enc_heads);
  opt("use_positional_encoding", c.use_positional_encoding);
  opt("use_cross_attention", c.use_cross_attention);
  opt("use_cross_residual", c.use_cross_residual);
  opt("layer_norm_eps", c.layer_norm_eps);
  return c;
}

ordered_json train_config_to_json(const TrainConfig& t) {
  ordered_json j;
  j["learning_rate"] = t.learning_rate;
  j["weight_decay"] = t.weight_decay;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["grad_clip_norm"] = t.grad_clip_norm;
  j["seed"] = t.seed;
  return j;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig t;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("learning_rate", t.learning_rate);
  opt("weight_decay", t.weight_decay);
  opt("max_epochs", t.max_epochs);
  opt("patience", t.patience);
  opt("grad_clip_norm", t.grad_clip_norm);
  opt("seed", t.seed);
  return t;
}

ordered_json trace_to_json(const TrainingTrace& t) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (const EpochStats& e : t.epochs) rows.push_back({e.train_mse, e.val_mse});
  j["epochs"] = std::move(rows);
  j["best_epoch"] = t.best_epoch;
  j["best_val_mse"] = t.best_val_mse;
  j["stop_reason"] = t.stop_reason;
  return j;
}

TrainingTrace trace_from_json(const ordered_json& j) {
  TrainingTrace t;
  for (const auto& row : j.at("epochs"))
    t.epochs.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
  t.best_epoch = j.at("best_epoch").get<std::size_t>();
  t.best_val_mse = j.at("best_val_mse").get<double>();
  t.stop_reason = j.at("stop_reason").get<std::string>();
  return t;
}

}  // namespace

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  ordered_json header;
  header["format"] = "histoprism-checkpoint-v1";
  header["config"] = model_config_to_json(ck.config);
  header["train_config"] = train_config_to_json(ck.train_config);
  header["trained_split"] = ck.trained_split;
  header["trace"] = trace_to_json(ck.trace);
  ordered_json dir = ordered_json::array();
  ck.params.for_each_tensor([&](const std::string& name, const Matrix& m) {
    dir.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = std::move(dir);

  std::string header_text = header.dump();
  std::string buf;
  buf.append(kCheckpointMagic, 8);
  binio::put_u64(buf, header_text.size());
  buf.append(header_text);
  ck.params.for_each_tensor([&](const std::string&, const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) binio::put_f64(buf, m.data()[i]);
  });
  binio::write_file(path.string(), buf);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  binio::Reader r(binio::read_file(path.string()), path.string());
  r.expect_magic(kCheckpointMagic);
  std::uint64_t header_len = r.get_u64();
  ordered_json header = ordered_json::parse(r.get_bytes(header_len));
  if (header.at("format").get<std::string>() != "histoprism-checkpoint-v1")
    throw std::runtime_error(path.string() + ": unknown checkpoint format");

  Checkpoint ck;
  ck.config = model_config_from_json(header.at("config"));
  ck.config.validate();
  ck.train_config = train_config_from_json(header.at("train_config"));
  ck.trained_split = header.value("trained_split", std::size_t{0});
  ck.trace = trace_from_json(header.at("trace"));

  // Shape the parameter container from config, then fill tensors in header
  // directory order, which must match the canonical order.
  ck.params = init_params(ck.config, 0);
  std::vector<Matrix> tensors;
  for (const auto& entry : header.at("tensors")) {
    Matrix m(entry.at("rows").get<std::size_t>(), entry.at("cols").get<std::size_t>());
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.get_f64();
    tensors.push_back(std::move(m));
  }
  r.require_exhausted();

  std::size_t idx = 0;
  std::vector<std::string> names = ck.params.tensor_names();
  if (names.size() != tensors.size())
    throw std::runtime_error(path.string() + ": tensor count mismatch with config");
  for (const auto& entry : header.at("tensors")) {
    if (entry.at("name").get<std::string>() != names[idx])
      throw std::runtime_error(path.string() + ": tensor order mismatch at " + names[idx]);
    ++idx;
  }
  ck.params.load_flat(tensors);
  return ck;
}

ModelConfig model_config_from_json_text(const std::string& text, const std::string& source) {
  try {
    return model_config_from_json(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
}

TrainConfig train_config_from_json_text(const std::string& text, const std::string& source) {
  try {
    return train_config_from_json(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
}

std::string model_config_to_json_text(const ModelConfig& cfg) {
  return model_config_to_json(cfg).dump(2) + "\n";
}

std::string train_config_to_json_text(const TrainConfig& tc) {
  return train_config_to_json(tc).dump(2) + "\n";
}

}  // namespace histoprism
