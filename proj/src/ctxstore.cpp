#include "spanline/ctxstore.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spanline {

namespace fs = std::filesystem;
using nlohmann::json;

const MatF& ContextualStore::get(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end())
    throw Error("missing contextual embeddings for " + id);
  return it->second;
}

void ContextualStore::put(const std::string& id, MatF m) {
  if (dim_ == 0) dim_ = static_cast<int>(m.cols());
  if (m.cols() != dim_)
    throw Error("contextual matrix for " + id + " has " +
                std::to_string(m.cols()) + " columns, store dimension is " +
                std::to_string(dim_));
  entries_[id] = std::move(m);
}

void ContextualStore::save(const std::string& dir) const {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "spanline-ctx/1";
  manifest["dim"] = dim_;
  json entries = json::array();
  std::ofstream bin(fs::path(dir) / "vectors.bin", std::ios::binary);
  if (!bin) throw Error("cannot write " + dir + "/vectors.bin");
  std::uint64_t offset = 0;
  for (const auto& [id, m] : entries_) {
    entries.push_back({{"id", id},
                       {"rows", static_cast<int>(m.rows())},
                       {"offset", offset}});
    const std::uint64_t bytes =
        static_cast<std::uint64_t>(m.size()) * sizeof(float);
    bin.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  manifest["entries"] = entries;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw Error("cannot write " + dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";
}

ContextualStore ContextualStore::load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw Error("cannot open " + dir + "/manifest.json");
  json manifest = json::parse(mf);
  ContextualStore store(manifest.at("dim").get<int>());
  std::ifstream bin(fs::path(dir) / "vectors.bin", std::ios::binary);
  if (!bin) throw Error("cannot open " + dir + "/vectors.bin");
  for (const json& e : manifest.at("entries")) {
    const std::string id = e.at("id").get<std::string>();
    const int rows = e.at("rows").get<int>();
    MatF m(rows, store.dim());
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(m.data()),
             static_cast<std::streamsize>(static_cast<std::uint64_t>(m.size()) *
                                          sizeof(float)));
    if (!bin)
      throw Error("truncated vectors.bin while reading entry " + id);
    store.put(id, std::move(m));
  }
  return store;
}

Mat lookup_contextual(const AnnotatedQuestion& q,
                      const ContextualStore& store) {
  const MatF& m = store.get(q.id);
  if (m.rows() != q.size())
    throw Error("contextual embeddings for " + q.id + " have " +
                std::to_string(m.rows()) + " rows, question has " +
                std::to_string(q.size()) + " tokens");
  if (!m.allFinite())
    throw Error("contextual embeddings for " + q.id + " contain non-finite values");
  return m.cast<double>();
}

StaticVectors load_static_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open static vector file: " + path);
  StaticVectors sv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<float> vec;
    float v;
    while (ls >> v) vec.push_back(v);
    // Some vector files start with a "count dim" header line; skip it.
    if (line_no == 1 && vec.size() == 1) continue;
    if (vec.empty())
      throw Error("static vector file line " + std::to_string(line_no) +
                  ": no values");
    if (sv.dim == 0) sv.dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != sv.dim)
      throw Error("static vector file line " + std::to_string(line_no) +
                  ": expected " + std::to_string(sv.dim) + " values, got " +
                  std::to_string(vec.size()));
    sv.vectors[word] = std::move(vec);
  }
  return sv;
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 stream; cheap, reproducible, well distributed.
double unit_value(std::uint64_t key, int component) {
  std::uint64_t z = key + 0x9e3779b97f4a7c15ull *
                              (static_cast<std::uint64_t>(component) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace

ContextualStore make_hashed_store(const Corpus& corpus, int dim,
                                  std::uint64_t seed) {
  if (dim <= 0) throw Error("hashed store dimension must be positive");
  ContextualStore store(dim);
  for (const AnnotatedQuestion& q : corpus) {
    MatF m(q.size(), dim);
    for (int i = 0; i < q.size(); ++i) {
      const std::uint64_t self = fnv1a(q.tokens[static_cast<std::size_t>(i)].form, seed);
      const std::uint64_t prev =
          i > 0 ? fnv1a(q.tokens[static_cast<std::size_t>(i - 1)].form, seed) : fnv1a("<bos>", seed);
      const std::uint64_t next =
          i + 1 < q.size() ? fnv1a(q.tokens[static_cast<std::size_t>(i + 1)].form, seed)
                           : fnv1a("<eos>", seed);
      for (int c = 0; c < dim; ++c) {
        const double v = 0.8 * unit_value(self, c) + 0.1 * unit_value(prev, c) +
                         0.1 * unit_value(next, c);
        m(i, c) = static_cast<float>(v);
      }
    }
    store.put(q.id, std::move(m));
  }
  return store;
}

}  // namespace spanline
