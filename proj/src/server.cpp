#include "huh/server.hpp"

#include <atomic>
#include <condition_variable>
#include <iostream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace huh {

namespace fs = std::filesystem;

namespace {

void log_line(const std::string& message) { std::clog << "[huh-server] " << message << std::endl; }

std::vector<fs::path> find_bundle_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_regular_file(dir / "bundle.json", ec)) files.push_back(dir / "bundle.json");
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_directory(ec)) continue;
    const auto candidate = it->path() / "bundle.json";
    if (fs::is_regular_file(candidate, ec)) files.push_back(candidate);
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty() || s.size() > 19) return std::nullopt;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  std::int64_t value = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    value = value * 10 + (s[i] - '0');
  }
  return s[0] == '-' ? -value : value;
}

}  // namespace

BundleStore::BundleStore(fs::path dir)
    : dir_(std::move(dir)), snapshot_(std::make_shared<const BundleSnapshot>()) {}

void BundleStore::refresh(bool force) {
  std::map<std::string, fs::file_time_type> signature;
  for (const auto& path : find_bundle_files(dir_)) {
    std::error_code ec;
    signature[path.string()] = fs::last_write_time(path, ec);
  }
  {
    std::lock_guard lock(mutex_);
    if (!force && signature == signature_) return;
  }

  auto next = std::make_shared<BundleSnapshot>();
  for (const auto& [path, _] : signature) {
    try {
      auto bundle = load_bundle(path);
      const auto id = bundle.video_id;
      if (next->contains(id)) log_line("duplicate video id '" + id + "' in " + path + "; keeping the later file");
      (*next)[id] = std::move(bundle);
    } catch (const Error& e) {
      log_line("skipping " + path + ": " + e.what());
    }
  }
  if (next->empty()) log_line("NoBundles: no loadable bundle under " + dir_.string());

  std::lock_guard lock(mutex_);
  signature_ = std::move(signature);
  snapshot_ = std::move(next);
}

std::shared_ptr<const BundleSnapshot> BundleStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

std::vector<CatalogEntry> list_videos(const BundleSnapshot& snapshot) {
  std::vector<CatalogEntry> catalog;
  for (const auto& [id, b] : snapshot) {
    catalog.push_back({id, b.language, b.coverage_start_ms, b.coverage_end_ms, b.interval_ms, b.slot_count_per_level()});
  }
  return catalog;  // std::map keeps ids sorted
}

std::string catalog_json(const std::vector<CatalogEntry>& catalog) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : catalog) {
    doc.push_back({{"video_id", e.video_id},
                   {"language", e.language},
                   {"coverage_start_ms", e.coverage_start_ms},
                   {"coverage_end_ms", e.coverage_end_ms},
                   {"interval_ms", e.interval_ms},
                   {"slot_count_per_level", e.slot_count_per_level}});
  }
  return doc.dump();
}

struct ExplanationServer::Impl {
  std::shared_ptr<BundleStore> store;
  ServerOptions options;
  httplib::Server http;
  std::thread serve_thread;
  std::thread refresh_thread;
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopping = false;

  Impl(std::shared_ptr<BundleStore> s, ServerOptions o) : store(std::move(s)), options(o) { install_routes(); }

  static void json_reply(httplib::Response& res, const std::string& body, int status = 200) {
    res.status = status;
    res.set_content(body, "application/json");
  }

  static void not_found(httplib::Response& res, const std::string& what) {
    json_reply(res, nlohmann::json{{"error", what}}.dump(), 404);
  }

  void install_routes() {
    const std::string cache = "public, max-age=" + std::to_string(options.cache_max_age_s);
    http.set_post_routing_handler([cache](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET");
      if (res.status == 200) res.set_header("Cache-Control", cache);
    });

    http.Get("/videos", [this](const httplib::Request&, httplib::Response& res) {
      json_reply(res, catalog_json(list_videos(*store->snapshot())));
    });

    http.Get(R"(/videos/([^/]+)/manifest)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = store->snapshot();
      const auto it = snap->find(req.matches[1].str());
      if (it == snap->end()) return not_found(res, "unknown video");
      json_reply(res, manifest_json(it->second));
    });

    http.Get(R"(/videos/([^/]+)/explanations)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = store->snapshot();
      const auto it = snap->find(req.matches[1].str());
      if (it == snap->end()) return not_found(res, "unknown video");
      const auto t_ms = parse_int(req.get_param_value("t_ms"));
      const auto level = parse_int(req.get_param_value("level"));
      if (!t_ms || !level || (*level != 1 && *level != 2)) {
        return json_reply(res, R"({"error":"t_ms must be an integer and level 1 or 2"})", 400);
      }
      json_reply(res, lookup_json(lookup(it->second, *t_ms, static_cast<int>(*level))));
    });

    http.Get(R"(/static/([^/]+)/(\d+)/(\d+)\.json)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = store->snapshot();
      const auto it = snap->find(req.matches[1].str());
      if (it == snap->end()) return not_found(res, "unknown video");
      const auto level = parse_int(req.matches[2].str());
      const auto index = parse_int(req.matches[3].str());
      const auto& bundle = it->second;
      if (!level || !index || *level < 1 || *level > kLevels ||
          static_cast<std::size_t>(*index) >= bundle.slot_count_per_level()) {
        return not_found(res, "unknown slot");
      }
      json_reply(res, slot_file_json(bundle, bundle.slot(static_cast<int>(*level), static_cast<std::size_t>(*index))));
    });
  }

  void refresh_loop() {
    std::unique_lock lock(stop_mutex);
    while (!stop_cv.wait_for(lock, options.refresh_interval, [&] { return stopping; })) {
      lock.unlock();
      store->refresh();
      lock.lock();
    }
  }
};

ExplanationServer::ExplanationServer(std::shared_ptr<BundleStore> store, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), options)) {
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

ExplanationServer::~ExplanationServer() { stop(); }

int ExplanationServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) bound = 0;
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = 0;
  }
  if (bound <= 0) {
    throw ServerError(ServerError::Kind::kBindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void ExplanationServer::run() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = false;
  }
  impl_->refresh_thread = std::thread([this] { impl_->refresh_loop(); });
  impl_->http.listen_after_bind();
}

void ExplanationServer::start() {
  impl_->serve_thread = std::thread([this] { run(); });
  impl_->http.wait_until_ready();
}

void ExplanationServer::stop() {
  {
    std::lock_guard lock(impl_->stop_mutex);
    impl_->stopping = true;
  }
  impl_->stop_cv.notify_all();
  impl_->http.stop();
  if (impl_->serve_thread.joinable()) impl_->serve_thread.join();
  if (impl_->refresh_thread.joinable()) impl_->refresh_thread.join();
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  const auto fail = [&] { return ServerError(ServerError::Kind::kBindFailure, "bad --bind value '" + bind + "'"); };
  if (colon == std::string::npos || colon == 0) throw fail();
  const auto port = parse_int(bind.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) throw fail();
  return {bind.substr(0, colon), static_cast<int>(*port)};
}

void serve(const fs::path& bundle_dir, const std::string& bind, ServerOptions options) {
  auto store = std::make_shared<BundleStore>(bundle_dir);
  store->refresh(true);
  if (store->snapshot()->empty()) {
    throw ServerError(ServerError::Kind::kNoBundles, "no bundles under " + bundle_dir.string());
  }
  const auto [host, port] = parse_bind(bind);
  ExplanationServer server(store, options);
  const int bound = server.bind(host, port);
  log_line("serving " + std::to_string(store->snapshot()->size()) + " bundle(s) on " + host + ":" +
           std::to_string(bound));
  server.run();
}

}  // namespace huh
