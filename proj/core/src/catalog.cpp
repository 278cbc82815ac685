#include "deltastore/catalog.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deltastore/errors.hpp"

namespace deltastore {

namespace {

using nlohmann::json;

std::string now_utc() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ModelCatalog::ModelCatalog(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw IoError("cannot open catalog: " + path_.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw CorruptStore("catalog line " + std::to_string(lineno) +
                         " is not valid JSON");
    }
    try {
      CatalogEntry e;
      e.model_id = j.at("model_id").get<uint64_t>();
      e.name = j.at("name").get<std::string>();
      e.page_path = j.at("page").get<std::string>();
      e.arch_key = j.at("arch").get<std::string>();
      e.tolerance = j.at("tolerance").get<double>();
      e.created = j.at("created").get<std::string>();
      next_id_ = std::max(next_id_, e.model_id + 1);
      entries_.push_back(std::move(e));
    } catch (const json::exception&) {
      throw CorruptStore("catalog line " + std::to_string(lineno) +
                         " is missing fields");
    }
  }
}

CatalogEntry ModelCatalog::put(const std::string& name,
                               const std::string& page_path,
                               const std::string& arch_key, double tolerance) {
  std::lock_guard<std::mutex> lock(mu_);
  if (find_locked(name)) {
    throw DuplicateName("model name already exists: " + name);
  }
  CatalogEntry e;
  e.model_id = next_id_++;
  e.name = name;
  e.page_path = page_path;
  e.arch_key = arch_key;
  e.tolerance = tolerance;
  e.created = now_utc();

  json j{{"model_id", e.model_id}, {"name", e.name},       {"page", e.page_path},
         {"arch", e.arch_key},     {"tolerance", e.tolerance},
         {"created", e.created}};
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to catalog: " + path_.string());
  out << j.dump() << "\n";
  out.flush();
  if (!out) throw IoError("catalog write failed: " + path_.string());

  entries_.push_back(e);
  return e;
}

std::optional<CatalogEntry> ModelCatalog::find_locked(
    const std::string& name) const {
  for (const CatalogEntry& e : entries_) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

std::optional<CatalogEntry> ModelCatalog::find(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  return find_locked(name);
}

CatalogEntry ModelCatalog::get(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (auto e = find_locked(name)) return *e;
  throw NotFound("model not found: " + name);
}

CatalogEntry ModelCatalog::get(uint64_t model_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  for (const CatalogEntry& e : entries_) {
    if (e.model_id == model_id) return e;
  }
  throw NotFound("model id not found: " + std::to_string(model_id));
}

std::vector<CatalogEntry> ModelCatalog::list() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

size_t ModelCatalog::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

}  // namespace deltastore
