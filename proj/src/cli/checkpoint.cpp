#include "rclab/cli/checkpoint.hpp"

#include "rclab/num/param_io.hpp"
#include "rclab/util/binary_io.hpp"
#include "rclab/util/digest.hpp"

namespace rclab::cli {

using nlohmann::json;

namespace {

json parse_header(const util::Container& c, const std::filesystem::path& path, int version) {
  json header;
  try {
    header = json::parse(c.header);
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "' has a malformed header: " + e.what());
  }
  if (!header.is_object() || !header.contains("version") || !header["version"].is_number_integer()) {
    throw FormatError("'" + path.string() + "' header has no version");
  }
  if (header["version"].get<int>() != version) {
    throw FormatError("'" + path.string() + "' has version " + header["version"].dump() + ", expected " +
                      std::to_string(version));
  }
  if (!header.contains("payload_sha256") || !header.contains("tensors")) {
    throw FormatError("'" + path.string() + "' header lacks its tensor table");
  }
  if (util::sha256_hex(c.payload) != header["payload_sha256"].get<std::string>()) {
    throw CorruptionError("'" + path.string() + "' payload does not match its digest");
  }
  return header;
}

// Copies stored tensors into `into`, which was built from the same spec.
void fill_params(num::ParamSet& into, const json& table, std::span<const unsigned char> payload,
                 const std::filesystem::path& path) {
  num::ParamSet stored;
  try {
    stored = num::parse_params(table, payload);
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "' tensor table is malformed: " + e.what());
  }
  if (stored.size() != into.size()) {
    throw FormatError("'" + path.string() + "' stores " + std::to_string(stored.size()) + " tensors, its spec needs " +
                      std::to_string(into.size()));
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& s = stored.entry(i);
    const auto& want = into.entry(i);
    if (s.name != want.name || s.value.shape() != want.value.shape()) {
      throw FormatError("'" + path.string() + "' tensor '" + s.name + "' " + num::shape_string(s.value.shape()) +
                        " does not match the spec's '" + want.name + "' " + num::shape_string(want.value.shape()));
    }
    if (table[i].at("offset").get<std::size_t>() != expected_offset) {
      throw FormatError("'" + path.string() + "' tensor '" + s.name + "' has a non-contiguous offset");
    }
    expected_offset += s.value.size() * 4;
    into.assign(s.name, s.value);
    into.set_trainable(s.name, s.trainable);
  }
  if (expected_offset != payload.size()) throw FormatError("'" + path.string() + "' payload has trailing bytes");
}

}  // namespace

void save_checkpoint(const models::DenoiserModel& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  std::vector<unsigned char> payload;
  json tensors = num::append_params(model.params, payload);
  json header{{"version", kCheckpointVersion},
              {"spec", model.spec},
              {"tensors", std::move(tensors)},
              {"payload_sha256", util::sha256_hex(payload)},
              {"meta", {{"role", meta.role}, {"iterations", meta.iterations}, {"manifest_digest", meta.manifest_digest}}}};
  util::write_container(path, kCheckpointMagic, header.dump(), payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto c = util::read_container(path, kCheckpointMagic);
  const json header = parse_header(c, path, kCheckpointVersion);
  Checkpoint ck;
  try {
    ck.model.spec = header.at("spec").get<models::DenoiserSpec>();
    const json& m = header.at("meta");
    ck.meta.role = m.at("role").get<std::string>();
    ck.meta.iterations = m.at("iterations").get<std::uint64_t>();
    ck.meta.manifest_digest = m.at("manifest_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "' header is malformed: " + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError("'" + path.string() + "' stores an invalid spec: " + e.what());
  }
  ck.model = models::build_model(ck.model.spec, 0);
  fill_params(ck.model.params, header.at("tensors"), c.payload, path);
  return ck;
}

void save_classifier(const eval::TrainedClassifier& c, const std::filesystem::path& path) {
  std::vector<unsigned char> payload;
  json tensors = num::append_params(c.classifier.params, payload);
  json header{{"version", kClassifierVersion},
              {"input_shape", c.classifier.input_shape},
              {"class_count", c.classifier.class_count},
              {"hidden", c.classifier.hidden},
              {"feature_width", c.classifier.feature_width},
              {"held_out_accuracy", c.held_out_accuracy},
              {"held_out_count", c.held_out_count},
              {"tensors", std::move(tensors)},
              {"payload_sha256", util::sha256_hex(payload)}};
  util::write_container(path, kClassifierMagic, header.dump(), payload);
}

eval::TrainedClassifier load_classifier(const std::filesystem::path& path) {
  const auto c = util::read_container(path, kClassifierMagic);
  const json header = parse_header(c, path, kClassifierVersion);
  eval::TrainedClassifier tc;
  try {
    tc.classifier.input_shape = header.at("input_shape").get<num::Shape>();
    tc.classifier.class_count = header.at("class_count").get<std::size_t>();
    tc.classifier.hidden = header.at("hidden").get<std::size_t>();
    tc.classifier.feature_width = header.at("feature_width").get<std::size_t>();
    tc.held_out_accuracy = header.at("held_out_accuracy").get<double>();
    tc.held_out_count = header.at("held_out_count").get<std::size_t>();
    tc.classifier.params = num::parse_params(header.at("tensors"), c.payload);
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "' header is malformed: " + e.what());
  }
  return tc;
}

std::string file_digest(const std::filesystem::path& path) { return util::sha256_hex(util::read_file(path)); }

}  // namespace rclab::cli
