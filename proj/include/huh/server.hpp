#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "huh/bundle.hpp"
#include "huh/error.hpp"

namespace huh {

class ServerError : public Error {
 public:
  enum class Kind { kBindFailure, kNoBundles };
  ServerError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CatalogEntry {
  std::string video_id;
  std::string language;
  Millis coverage_start_ms = 0;
  Millis coverage_end_ms = 0;
  Millis interval_ms = 0;
  std::size_t slot_count_per_level = 0;
};

using BundleSnapshot = std::map<std::string, ExplanationBundle>;

// Bundles found under a directory: `<dir>/bundle.json` and
// `<dir>/<name>/bundle.json`. Readers get immutable snapshots; refresh()
// swaps in a new one.
class BundleStore {
 public:
  explicit BundleStore(std::filesystem::path dir);

  // Re-scans when any bundle file was added, removed or modified (or always
  // when `force`). Unreadable bundles are logged and skipped.
  void refresh(bool force = false);
  std::shared_ptr<const BundleSnapshot> snapshot() const;
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::shared_ptr<const BundleSnapshot> snapshot_;
  std::map<std::string, std::filesystem::file_time_type> signature_;
};

std::vector<CatalogEntry> list_videos(const BundleSnapshot& snapshot);
std::string catalog_json(const std::vector<CatalogEntry>& catalog);

struct ServerOptions {
  int cache_max_age_s = 86400;
  std::chrono::milliseconds refresh_interval{2000};
};

// Read-only explanation service:
//   GET /videos
//   GET /videos/{id}/manifest
//   GET /videos/{id}/explanations?t_ms=<int>&level=<1|2>
//   GET /static/{id}/{level}/{slot}.json
class ExplanationServer {
 public:
  ExplanationServer(std::shared_ptr<BundleStore> store, ServerOptions options = {});
  ~ExplanationServer();

  ExplanationServer(const ExplanationServer&) = delete;
  ExplanationServer& operator=(const ExplanationServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(). Also runs the bundle refresh loop.
  void run();
  // run() on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Splits "host:port"; throws ServerError::kBindFailure when malformed.
std::pair<std::string, int> parse_bind(const std::string& bind);

// Loads `bundle_dir`, binds and blocks serving. Throws kNoBundles when the
// directory holds no bundle at startup.
void serve(const std::filesystem::path& bundle_dir, const std::string& bind, ServerOptions options = {});

}  // namespace huh
