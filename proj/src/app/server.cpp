#include <httplib.h>

#include <shared_mutex>

#include "pmcad/app.hpp"
#include "pmcad/error.hpp"

namespace fs = std::filesystem;

namespace pmcad {

namespace {

// Thrown inside handlers to produce a specific HTTP status.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int http_status_for(Errc code) {
  switch (code) {
    case Errc::missing_file: return 404;
    case Errc::invalid_argument:
    case Errc::out_of_range:
    case Errc::bad_header: return 400;
    case Errc::empty_growth:
    case Errc::empty_input: return 422;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const std::string& field = {}) {
  nlohmann::json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  send_json(res, status, {{"error", err}});
}

int parse_int_param(const std::string& s, const char* field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw HttpError{400, "invalid_argument", std::string(field) + " must be an integer"};
}

double parse_double_param(const std::string& s, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw HttpError{400, "invalid_argument", std::string(field) + " must be a number"};
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const HttpError& e) {
      send_error(res, e.status, e.code, e.message);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.code()), errc_name(e.code()), e.what(), e.field());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct ApiServer::CaseState {
  // Serializes mutations and segmentation jobs for one case.
  std::mutex mutex;
  std::shared_mutex volume_mutex;
  std::shared_ptr<const CtVolume> volume;
};

ApiServer::ApiServer(RunConfig config)
    : workspace_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  for (const auto& e : workspace_.entries()) cases_[e.case_id] = std::make_unique<CaseState>();
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

ApiServer::CaseState& ApiServer::state(const std::string& case_id) {
  const auto it = cases_.find(case_id);
  if (it == cases_.end()) throw HttpError{404, "unknown_case", "no case " + case_id};
  return *it->second;
}

std::shared_ptr<const CtVolume> ApiServer::volume(const std::string& case_id) {
  CaseState& st = state(case_id);
  {
    std::shared_lock lock(st.volume_mutex);
    if (st.volume) return st.volume;
  }
  std::unique_lock lock(st.volume_mutex);
  if (!st.volume) st.volume = std::make_shared<const CtVolume>(load_volume(workspace_.find(case_id)->volume_path));
  return st.volume;
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

void ApiServer::wait_until_ready() const { server_->wait_until_ready(); }

void ApiServer::install_routes() {
  httplib::Server& s = *server_;
  const Workspace& ws = workspace_;

  auto summary = [this, &ws](const std::string& id) {
    nlohmann::json j = ws.status(id).to_json();
    const ManifestEntry* e = ws.find(id);
    const auto vol = volume(id);
    j["label"] = e->label;
    j["n_slices"] = vol->dims.nz;
    j["dims"] = {vol->dims.nx, vol->dims.ny, vol->dims.nz};
    return j;
  };

  s.Get("/api/cases", guarded([&ws, summary](const httplib::Request&, httplib::Response& res) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : ws.entries()) out.push_back(summary(e.case_id));
    send_json(res, 200, out);
  }));

  s.Get(R"(/api/cases/([^/]+))", guarded([this, summary](const httplib::Request& req, httplib::Response& res) {
    state(req.matches[1]);
    send_json(res, 200, summary(req.matches[1]));
  }));

  s.Get(R"(/api/cases/([^/]+)/slices/(-?\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto vol = volume(req.matches[1]);
    const int z = parse_int_param(req.matches[2], "z");
    if (z < 0 || z >= vol->dims.nz) throw HttpError{404, "out_of_range", "slice index out of range"};
    DisplayWindow window;
    if (req.has_param("level")) window.level = parse_double_param(req.get_param_value("level"), "level");
    if (req.has_param("width")) window.width = parse_double_param(req.get_param_value("width"), "width");
    if (!(window.width > 0)) throw HttpError{400, "invalid_argument", "width must be > 0"};
    res.set_content(encode_png(export_slice_image(*vol, z, window)), "image/png");
  }));

  s.Put(R"(/api/cases/([^/]+)/seed)", guarded([this, &ws](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    CaseState& st = state(id);
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      throw HttpError{400, "bad_request", "body must be JSON"};
    }
    Seed seed;
    try {
      seed = {body.at("z").get<int>(), body.at("x").get<int>(), body.at("y").get<int>()};
    } catch (const nlohmann::json::exception&) {
      throw HttpError{400, "bad_request", "body must be {\"z\":int,\"x\":int,\"y\":int}"};
    }
    const auto vol = volume(id);
    if (seed.z < 0 || seed.z >= vol->dims.nz || seed.x < 0 || seed.x >= vol->dims.nx || seed.y < 0 ||
        seed.y >= vol->dims.ny) {
      throw HttpError{400, "out_of_range", "seed outside the volume"};
    }
    std::lock_guard lock(st.mutex);
    CaseStatus status = ws.status(id);
    if (status.stage > Stage::seeded) {
      throw HttpError{409, "conflict", std::string("case is ") + stage_name(status.stage) + "; delete the mask first"};
    }
    status.seed = seed;
    status.stage = Stage::seeded;
    ws.save_status(status);
    send_json(res, 200, status.to_json());
  }));

  s.Post(R"(/api/cases/([^/]+)/segment)", guarded([this, &ws](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    CaseState& st = state(id);
    const auto vol = volume(id);
    std::lock_guard lock(st.mutex);
    CaseStatus status = ws.status(id);
    if (!status.seed) throw HttpError{409, "conflict", "case has no seed"};
    if (status.stage > Stage::segmented) {
      throw HttpError{409, "conflict", std::string("case is ") + stage_name(status.stage) + "; delete the mask first"};
    }
    SegmentationResult result = propagate_volume(*vol, *status.seed, ws.config().segmentation);
    result.mask.case_id = id;
    write_file_atomic(ws.mask_file(id), encode_mask(result.mask));
    const nlohmann::json trace = trace_to_json(result);
    write_file_atomic(ws.trace_file(id), trace.dump(2) + "\n");
    status.stage = Stage::segmented;
    status.mask_path = fs::relative(ws.mask_file(id), ws.config().work_dir).generic_string();
    ws.save_status(status);

    nlohmann::json slices = nlohmann::json::array();
    for (const auto& [z, rec] : result.per_slice) {
      nlohmann::json reasons = nlohmann::json::array();
      for (const auto& t : rec.traces) reasons.push_back(stop_reason_name(t.stop_reason));
      slices.push_back({{"z", z}, {"area_px", rec.area_px}, {"stop_reasons", reasons}});
    }
    send_json(res, 200,
              {{"case_id", id},
               {"status", status.to_json()},
               {"seed_used", {{"z", result.seed_used.z}, {"x", result.seed_used.x}, {"y", result.seed_used.y}}},
               {"per_slice", slices}});
  }));

  s.Get(R"(/api/cases/([^/]+)/mask/(-?\d+))", guarded([this, &ws](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    state(id);
    const int z = parse_int_param(req.matches[2], "z");
    const fs::path path = ws.mask_file(id);
    if (!fs::exists(path)) throw HttpError{404, "no_mask", "case has no mask"};
    const SegmentationMask mask = decode_mask(read_file(path));
    if (z < 0 || z >= mask.dims.nz) throw HttpError{404, "out_of_range", "slice index out of range"};
    res.set_content(encode_png(export_mask_image(mask, z)), "image/png");
  }));

  s.Post(R"(/api/cases/([^/]+)/accept)", guarded([this, &ws](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    CaseState& st = state(id);
    std::lock_guard lock(st.mutex);
    CaseStatus status = ws.status(id);
    if (status.stage < Stage::segmented) throw HttpError{409, "conflict", "case is not segmented"};
    if (status.stage == Stage::segmented) {
      status.stage = Stage::accepted;
      ws.save_status(status);
    }
    send_json(res, 200, status.to_json());
  }));

  s.Delete(R"(/api/cases/([^/]+)/mask)", guarded([this, &ws](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    CaseState& st = state(id);
    std::lock_guard lock(st.mutex);
    CaseStatus status = ws.status(id);
    if (!status.seed) throw HttpError{409, "conflict", "case has no seed"};
    std::error_code ec;
    fs::remove(ws.mask_file(id), ec);
    fs::remove(ws.trace_file(id), ec);
    status.stage = Stage::seeded;
    status.mask_path.clear();
    ws.save_status(status);
    send_json(res, 200, status.to_json());
  }));

  if (!ws.config().serve.static_dir.empty()) s.set_mount_point("/", ws.config().serve.static_dir.string());

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "http_" + std::to_string(res.status), "request failed");
  });
}

}  // namespace pmcad
