#include "dfsfm/matches.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace dfsfm {

namespace {

double SnapCoordinate(double x, double r, std::uint32_t extent) {
  double q = std::round(x / r) * r;
  if (extent > 0) {
    const double max_node = std::floor(static_cast<double>(extent - 1) / r) * r;
    q = std::clamp(q, 0.0, max_node);
  }
  return q;
}

struct CellPairKey {
  std::int64_t ax, ay, bx, by;
  bool operator==(const CellPairKey&) const = default;
};

struct CellPairHash {
  std::size_t operator()(const CellPairKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (const std::int64_t v : {k.ax, k.ay, k.bx, k.by}) {
      h ^= static_cast<std::size_t>(v);
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

QuantizedMatchPair QuantizeMatches(const RawMatchPair& pair, double r, ImageExtent extent_a,
                                   ImageExtent extent_b) {
  QuantizedMatchPair out;
  out.image_a = pair.image_a;
  out.image_b = pair.image_b;
  out.grid_size = r;
  out.matches.reserve(pair.matches.size());

  std::unordered_map<CellPairKey, std::size_t, CellPairHash> slot;
  slot.reserve(pair.matches.size());
  for (const Match& m : pair.matches) {
    Match q = m;
    q.a = {SnapCoordinate(m.a.x(), r, extent_a.width), SnapCoordinate(m.a.y(), r, extent_a.height)};
    q.b = {SnapCoordinate(m.b.x(), r, extent_b.width), SnapCoordinate(m.b.y(), r, extent_b.height)};
    const CellPairKey key{std::llround(q.a.x()), std::llround(q.a.y()), std::llround(q.b.x()),
                          std::llround(q.b.y())};
    const auto [it, inserted] = slot.try_emplace(key, out.matches.size());
    if (inserted) {
      out.matches.push_back(q);
    } else if (q.confidence > out.matches[it->second].confidence) {
      out.matches[it->second].confidence = q.confidence;
    }
  }
  return out;
}

ImageId MatchSet::FindImage(const std::string& name) const {
  for (std::size_t i = 0; i < image_names.size(); ++i) {
    if (image_names[i] == name) return static_cast<ImageId>(i);
  }
  return kInvalidImageId;
}

ImageId MatchSet::AddImage(const std::string& name) {
  const ImageId existing = FindImage(name);
  if (existing != kInvalidImageId) return existing;
  image_names.push_back(name);
  return static_cast<ImageId>(image_names.size() - 1);
}

MatchSet ReadMatchFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open match file: " + path);

  MatchSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream header(line);
    std::string tag, name_a, name_b;
    std::size_t count = 0;
    if (!(header >> tag >> name_a >> name_b >> count) || tag != "PAIR") {
      throw std::runtime_error("malformed PAIR header at line " + std::to_string(line_no) +
                               " in " + path);
    }
    RawMatchPair pair;
    pair.image_a = set.AddImage(name_a);
    pair.image_b = set.AddImage(name_b);
    pair.matches.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) {
        throw std::runtime_error("truncated match block in " + path);
      }
      ++line_no;
      Match m;
      std::istringstream row(line);
      if (!(row >> m.a.x() >> m.a.y() >> m.b.x() >> m.b.y() >> m.confidence)) {
        throw std::runtime_error("malformed match at line " + std::to_string(line_no) + " in " +
                                 path);
      }
      pair.matches.push_back(m);
    }
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

void WriteMatchFile(const MatchSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[160];
  for (const RawMatchPair& pair : set.pairs) {
    out << "PAIR " << set.image_names.at(pair.image_a) << " " << set.image_names.at(pair.image_b)
        << " " << pair.matches.size() << "\n";
    for (const Match& m : pair.matches) {
      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.6f\n", m.a.x(), m.a.y(), m.b.x(),
                    m.b.y(), m.confidence);
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace dfsfm
