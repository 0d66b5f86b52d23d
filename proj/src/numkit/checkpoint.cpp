#include "afbc/numkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "afbc/errors.hpp"

namespace afbc::numkit {

namespace {

constexpr const char* kMagic = "AFBC-CHECKPOINT 1";

void put_f32_le(std::ostream& os, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

float get_f32_le(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpNet& net,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os << kMagic << '\n';
  os << "layers:";
  for (int w : net.layer_sizes()) os << ' ' << w;
  os << '\n';
  os << "float_width: 32\n";
  os << "byte_order: little\n";
  os << "parameter_count: " << net.parameter_count() << '\n';
  for (const auto& [key, value] : metadata) {
    if (key.find(':') != std::string::npos || key.find('\n') != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw DataError("checkpoint metadata must be single-line and colon-free keys: " + key);
    }
    os << "meta." << key << ": " << value << '\n';
  }
  os << "end_header\n";
  for (double v : net.flat_parameters()) put_f32_le(os, static_cast<float>(v));
  if (!os) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != kMagic) {
    throw DataError("not an AFBC checkpoint (bad magic line): " + path.string());
  }

  std::vector<int> layers;
  std::size_t count = 0;
  bool have_count = false;
  Checkpoint ckpt;
  bool ended = false;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw DataError("malformed checkpoint header line: " + line);
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "layers") {
      std::istringstream ss(value);
      int w;
      while (ss >> w) layers.push_back(w);
    } else if (key == "float_width") {
      if (value != "32") throw DataError("unsupported checkpoint float width: " + value);
    } else if (key == "byte_order") {
      if (value != "little") throw DataError("unsupported checkpoint byte order: " + value);
    } else if (key == "parameter_count") {
      count = std::stoull(value);
      have_count = true;
    } else if (key.rfind("meta.", 0) == 0) {
      ckpt.metadata[key.substr(5)] = value;
    } else {
      throw DataError("unknown checkpoint header key: " + key);
    }
  }
  if (!ended || layers.size() < 2 || !have_count) {
    throw DataError("incomplete checkpoint header: " + path.string());
  }
  try {
    ckpt.net = MlpNet(layers);
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid checkpoint layer sizes: ") + e.what());
  }
  if (ckpt.net.parameter_count() != count) {
    throw DataError("checkpoint parameter_count disagrees with layer sizes");
  }
  std::vector<unsigned char> payload(count * 4);
  is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(is.gcount()) != payload.size()) {
    throw DataError("truncated checkpoint payload: " + path.string());
  }
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) params[i] = get_f32_le(payload.data() + 4 * i);
  ckpt.net.set_flat_parameters(params);
  return ckpt;
}

}  // namespace afbc::numkit
