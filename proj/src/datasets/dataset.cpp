#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "afbc/datasets.hpp"

namespace afbc {

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::kVeryBad: return "VeryBad";
    case Tier::kBad: return "Bad";
    case Tier::kOkay: return "Okay";
    case Tier::kGood: return "Good";
    case Tier::kExpert: return "Expert";
  }
  return "?";
}

Tier tier_for_return(double average_return, double low, double high) {
  if (!(low < high)) throw ConfigError("tier return range must satisfy low < high");
  const double frac = (average_return - low) / (high - low);
  const auto bin = static_cast<long>(std::floor(frac * static_cast<double>(kTierCount)));
  return static_cast<Tier>(std::clamp<long>(bin, 0, kTierCount - 1));
}

Dataset::Dataset(int state_dim, int action_dim) : state_dim_(state_dim), action_dim_(action_dim) {
  if (state_dim <= 0 || action_dim <= 0) throw ConfigError("dataset dimensions must be positive");
}

void Dataset::reserve(std::size_t n) {
  states_.reserve(n * state_dim_);
  actions_.reserve(n * action_dim_);
  rewards_.reserve(n);
  next_states_.reserve(n * state_dim_);
  dones_.reserve(n);
  tiers_.reserve(n);
}

void Dataset::push_back(const Transition& t, std::uint8_t tier, double return_to_go) {
  if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_) {
    throw DataError("transition dimensions do not match the dataset");
  }
  if (!std::isfinite(t.r)) throw DataError("transition reward must be finite");
  const bool with_rtg = !std::isnan(return_to_go);
  if (!empty() && with_rtg != !returns_to_go_.empty()) {
    throw DataError("return-to-go annotations must be present for all transitions or none");
  }
  states_.insert(states_.end(), t.s.data(), t.s.data() + state_dim_);
  actions_.insert(actions_.end(), t.a.data(), t.a.data() + action_dim_);
  rewards_.push_back(t.r);
  next_states_.insert(next_states_.end(), t.s_next.data(), t.s_next.data() + state_dim_);
  dones_.push_back(t.done ? 1 : 0);
  tiers_.push_back(tier);
  if (with_rtg) returns_to_go_.push_back(return_to_go);
}

void Dataset::append(const Dataset& other, std::size_t i) {
  push_back(other.at(i), other.tier(i),
            other.returns_to_go_.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : other.returns_to_go_[i]);
}

Transition Dataset::at(std::size_t i) const {
  if (i >= size()) throw UsageError("dataset index out of range");
  Transition t;
  t.s = Eigen::Map<const Vector>(states_.data() + i * state_dim_, state_dim_);
  t.a = Eigen::Map<const Vector>(actions_.data() + i * action_dim_, action_dim_);
  t.r = rewards_[i];
  t.s_next = Eigen::Map<const Vector>(next_states_.data() + i * state_dim_, state_dim_);
  t.done = dones_[i] != 0;
  return t;
}

double Dataset::return_to_go(std::size_t i) const {
  if (returns_to_go_.empty()) throw DataError("dataset carries no return-to-go annotations");
  return returns_to_go_.at(i);
}

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Batch b;
  b.indices.assign(indices.begin(), indices.end());
  b.states.resize(state_dim_, n);
  b.actions.resize(action_dim_, n);
  b.rewards.resize(n);
  b.next_states.resize(state_dim_, n);
  b.dones.resize(n);
  if (!returns_to_go_.empty()) b.returns_to_go.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    if (i >= size()) throw UsageError("batch index out of range");
    std::copy_n(states_.data() + i * state_dim_, state_dim_, b.states.col(j).data());
    std::copy_n(actions_.data() + i * action_dim_, action_dim_, b.actions.col(j).data());
    std::copy_n(next_states_.data() + i * state_dim_, state_dim_, b.next_states.col(j).data());
    b.rewards(j) = rewards_[i];
    b.dones(j) = dones_[i] ? 1.0 : 0.0;
    if (!returns_to_go_.empty()) b.returns_to_go(j) = returns_to_go_[i];
  }
  return b;
}

std::array<std::size_t, kTierCount> Dataset::tier_counts() const {
  std::array<std::size_t, kTierCount> counts{};
  for (auto t : tiers_) {
    if (t < kTierCount) ++counts[t];
  }
  return counts;
}

std::size_t Dataset::unlabeled_count() const {
  return static_cast<std::size_t>(std::count(tiers_.begin(), tiers_.end(), kUnlabeledTier));
}

namespace {

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

bool Dataset::operator==(const Dataset& o) const {
  return state_dim_ == o.state_dim_ && action_dim_ == o.action_dim_ &&
         bitwise_equal(states_, o.states_) && bitwise_equal(actions_, o.actions_) &&
         bitwise_equal(rewards_, o.rewards_) && bitwise_equal(next_states_, o.next_states_) &&
         dones_ == o.dones_ && tiers_ == o.tiers_ && bitwise_equal(returns_to_go_, o.returns_to_go_);
}

// ----------------------------------------------------------------- payload

namespace {

void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::size_t payload_size(int sd, int ad, std::size_t n, bool rtg) {
  return n * 8 * (2 * static_cast<std::size_t>(sd) + static_cast<std::size_t>(ad) + 1) + 2 * n +
         (rtg ? 8 * n : 0);
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<unsigned char> encode_payload(const Dataset& d) {
  std::vector<unsigned char> out;
  out.reserve(payload_size(d.state_dim(), d.action_dim(), d.size(), !d.returns_to_go().empty()));
  for (double v : d.states()) put_f64(out, v);
  for (double v : d.actions()) put_f64(out, v);
  for (double v : d.rewards()) put_f64(out, v);
  for (double v : d.next_states()) put_f64(out, v);
  out.insert(out.end(), d.dones().begin(), d.dones().end());
  out.insert(out.end(), d.tiers().begin(), d.tiers().end());
  for (double v : d.returns_to_go()) put_f64(out, v);
  return out;
}

Dataset Dataset::decode_payload(std::span<const unsigned char> bytes, int sd, int ad,
                                std::size_t n, bool rtg) {
  if (bytes.size() != payload_size(sd, ad, n, rtg)) {
    throw DatasetLoadError(LoadErrorKind::kTruncated,
                           "dataset payload has " + std::to_string(bytes.size()) +
                               " bytes, manifest implies " +
                               std::to_string(payload_size(sd, ad, n, rtg)));
  }
  Dataset d(sd, ad);
  const unsigned char* p = bytes.data();
  auto read_f64 = [&p](std::vector<double>& dst, std::size_t count) {
    dst.resize(count);
    for (std::size_t i = 0; i < count; ++i, p += 8) dst[i] = get_f64(p);
  };
  read_f64(d.states_, n * sd);
  read_f64(d.actions_, n * ad);
  read_f64(d.rewards_, n);
  read_f64(d.next_states_, n * sd);
  d.dones_.assign(p, p + n);
  p += n;
  d.tiers_.assign(p, p + n);
  p += n;
  if (rtg) read_f64(d.returns_to_go_, n);
  return d;
}

// ---------------------------------------------------------------- manifest

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "afbc_dataset_version: " << m.format_version << '\n';
  os << "recipe: " << m.recipe << '\n';
  os << "env: " << m.env_id << '\n';
  os << "seed: " << m.seed << '\n';
  os << "state_dim: " << m.state_dim << '\n';
  os << "action_dim: " << m.action_dim << '\n';
  os << "count: " << m.total << '\n';
  os << "tier_counts:";
  for (auto c : m.tier_counts) os << ' ' << c;
  os << '\n';
  os << "unlabeled_count: " << m.unlabeled_count << '\n';
  os << "has_return_to_go: " << (m.has_returns_to_go ? 1 : 0) << '\n';
  os << "checksum_fnv1a64: " << std::hex << std::setw(16) << std::setfill('0') << m.checksum
     << std::dec << std::setfill(' ') << '\n';
  os << std::setprecision(17);
  for (const auto& b : m.blocks) {
    os << "block: " << static_cast<int>(b.tier) << ' ' << b.average_return << ' '
       << (b.uniform_random ? 1 : 0) << ' ' << b.begin << ' ' << b.end << '\n';
  }
  return os.str();
}

namespace {

// String values may be empty, which stream extraction reports as failure.
std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  m.format_version = -1;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto fail = [&line_no](const std::string& why) {
    throw DatasetLoadError(LoadErrorKind::kMalformed,
                           "manifest line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) fail("expected 'key: value'");
    const std::string key = line.substr(0, colon);
    std::istringstream value(line.substr(colon + 1));
    {
      if (key == "afbc_dataset_version") {
        value >> m.format_version;
      } else if (key == "recipe") {
        m.recipe = trimmed(line.substr(colon + 1));
      } else if (key == "env") {
        m.env_id = trimmed(line.substr(colon + 1));
      } else if (key == "seed") {
        value >> m.seed;
      } else if (key == "state_dim") {
        value >> m.state_dim;
      } else if (key == "action_dim") {
        value >> m.action_dim;
      } else if (key == "count") {
        value >> m.total;
      } else if (key == "tier_counts") {
        for (auto& c : m.tier_counts) value >> c;
      } else if (key == "unlabeled_count") {
        value >> m.unlabeled_count;
      } else if (key == "has_return_to_go") {
        int flag = 0;
        value >> flag;
        m.has_returns_to_go = flag != 0;
      } else if (key == "checksum_fnv1a64") {
        value >> std::hex >> m.checksum;
      } else if (key == "block") {
        BlockInfo b;
        int tier = 0;
        int uniform = 0;
        value >> tier >> b.average_return >> uniform >> b.begin >> b.end;
        if (tier < 0 || tier >= static_cast<int>(kTierCount)) fail("block tier out of range");
        b.tier = static_cast<Tier>(tier);
        b.uniform_random = uniform != 0;
        m.blocks.push_back(b);
      } else {
        fail("unknown key '" + key + "'");
      }
    }
    if (value.fail()) fail("could not parse value for '" + key + "'");
  }
  if (m.format_version < 0) {
    throw DatasetLoadError(LoadErrorKind::kMalformed, "manifest lacks afbc_dataset_version");
  }
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& payload) {
  auto p = payload;
  p += ".manifest";
  return p;
}

DatasetManifest save_dataset(const Dataset& data, DatasetManifest m,
                             const std::filesystem::path& path) {
  const auto payload = encode_payload(data);
  m.format_version = DatasetManifest::kFormatVersion;
  m.state_dim = data.state_dim();
  m.action_dim = data.action_dim();
  m.total = data.size();
  m.tier_counts = data.tier_counts();
  m.unlabeled_count = data.unlabeled_count();
  m.has_returns_to_go = !data.returns_to_go().empty();
  m.checksum = fnv1a(payload);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DatasetLoadError(LoadErrorKind::kIo, "cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
    if (!os) throw DatasetLoadError(LoadErrorKind::kIo, "failed writing " + path.string());
  }
  std::ofstream ms(manifest_path(path), std::ios::trunc);
  if (!ms) throw DatasetLoadError(LoadErrorKind::kIo, "cannot write manifest for " + path.string());
  ms << format_manifest(m);
  return m;
}

StoredDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream ms(manifest_path(path));
  if (!ms) {
    throw DatasetLoadError(LoadErrorKind::kIo, "missing manifest " + manifest_path(path).string());
  }
  std::stringstream text;
  text << ms.rdbuf();
  DatasetManifest m = parse_manifest(text.str());
  if (m.format_version != DatasetManifest::kFormatVersion) {
    throw DatasetLoadError(LoadErrorKind::kVersionMismatch,
                           "dataset format version " + std::to_string(m.format_version) +
                               " unsupported (expected " +
                               std::to_string(DatasetManifest::kFormatVersion) + ")");
  }
  if (m.state_dim <= 0 || m.action_dim <= 0) {
    throw DatasetLoadError(LoadErrorKind::kMalformed, "manifest has invalid dimensions");
  }

  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetLoadError(LoadErrorKind::kIo, "cannot open " + path.string());
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
  const std::size_t expected = payload_size(m.state_dim, m.action_dim, m.total, m.has_returns_to_go);
  if (payload.size() < expected) {
    throw DatasetLoadError(LoadErrorKind::kTruncated,
                           "dataset payload truncated: " + std::to_string(payload.size()) + " of " +
                               std::to_string(expected) + " bytes");
  }
  if (payload.size() > expected) {
    throw DatasetLoadError(LoadErrorKind::kMalformed, "dataset payload has trailing bytes");
  }
  if (fnv1a(payload) != m.checksum) {
    throw DatasetLoadError(LoadErrorKind::kChecksumMismatch,
                           "dataset checksum mismatch for " + path.string());
  }
  StoredDataset out{Dataset::decode_payload(payload, m.state_dim, m.action_dim, m.total,
                                            m.has_returns_to_go),
                    m};
  if (out.data.tier_counts() != m.tier_counts || out.data.unlabeled_count() != m.unlabeled_count) {
    throw DatasetLoadError(LoadErrorKind::kMalformed, "manifest tier counts disagree with payload");
  }
  return out;
}

}  // namespace afbc
