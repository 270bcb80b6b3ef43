#pragma once

#include <memory>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "interdoc/corpus.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/error.hpp"

namespace interdoc {

namespace remote_detail {

using json = nlohmann::json;

inline json item(const Query& q) {
  json images = json::array();
  for (const auto& ref : q.image_refs) images.push_back(httplib::detail::base64_encode(ref));
  return json{{"text", q.text}, {"images", images}, {"tables", json::array()}};
}

inline json item(const Section& s) {
  std::string text = s.heading;
  json images = json::array();
  json tables = json::array();
  for (const auto& seg : s.segments) {
    switch (seg.kind) {
      case SegmentKind::text:
        if (!text.empty()) text += '\n';
        text += seg.content;
        break;
      case SegmentKind::image: images.push_back(httplib::detail::base64_encode(seg.content)); break;
      case SegmentKind::table: tables.push_back(seg.content); break;
    }
  }
  return json{{"text", text}, {"images", images}, {"tables", tables}};
}

}  // namespace remote_detail

struct HealthInfo {
  std::string status;
  std::string model;
  std::size_t dim = 0;
};

/// Client for the embedding service. Requests are chunked to the service's
/// 64-item cap; responses are reassembled in request order.
class RemoteClient {
 public:
  static constexpr std::size_t kMaxItems = 64;

  explicit RemoteClient(std::string endpoint, int timeout_s = 30) : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {}

  const std::string& endpoint() const { return endpoint_; }

  HealthInfo health() const {
    auto res = client().Get("/v1/health");
    check_transport(res, "/v1/health");
    if (res->status != 200) throw Error(ErrorKind::ServiceError, "/v1/health", "HTTP " + std::to_string(res->status));
    const auto body = parse(res->body, "/v1/health");
    try {
      return HealthInfo{body.at("status").get<std::string>(), body.at("model").get<std::string>(),
                        body.at("dim").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ProtocolError, "/v1/health", e.what());
    }
  }

  /// Raw call: one embedding per JSON item, all of the declared dim.
  std::vector<Embedding> embed(Role role, const std::vector<remote_detail::json>& items) const {
    if (items.empty()) throw Error(ErrorKind::InvalidArgument, "/v1/embed", "items must be non-empty");
    std::vector<Embedding> out;
    out.reserve(items.size());
    std::size_t dim = 0;
    for (std::size_t start = 0; start < items.size(); start += kMaxItems) {
      const std::size_t n = std::min(kMaxItems, items.size() - start);
      remote_detail::json chunk = remote_detail::json::array();
      for (std::size_t i = start; i < start + n; ++i) chunk.push_back(items[i]);
      remote_detail::json req{{"role", std::string(to_string(role))}, {"items", std::move(chunk)}};
      const auto body = post("/v1/embed", req);
      std::vector<std::vector<float>> vecs;
      std::size_t declared = 0;
      try {
        declared = body.at("dim").get<std::size_t>();
        vecs = body.at("embeddings").get<std::vector<std::vector<float>>>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ProtocolError, "/v1/embed", e.what());
      }
      if (vecs.size() != n) {
        throw Error(ErrorKind::ProtocolError, "/v1/embed",
                    "sent " + std::to_string(n) + " items, got " + std::to_string(vecs.size()) + " embeddings");
      }
      if (dim == 0) dim = declared;
      if (declared == 0 || declared != dim) throw Error(ErrorKind::ProtocolError, "/v1/embed", "declared dim changed");
      for (auto& v : vecs) {
        if (v.size() != declared) {
          throw Error(ErrorKind::ProtocolError, "/v1/embed",
                      "embedding length " + std::to_string(v.size()) + " != declared dim " + std::to_string(declared));
        }
        out.push_back(Embedding{role, std::move(v)});
      }
    }
    return out;
  }

  std::vector<double> score(const Query& q, std::span<const Section> sections) const {
    remote_detail::json secs = remote_detail::json::array();
    for (const auto& s : sections) secs.push_back(remote_detail::item(s));
    return score_raw(remote_detail::item(q), secs);
  }

  std::vector<double> score_raw(const remote_detail::json& query, const remote_detail::json& sections) const {
    const auto body = post("/v1/score", remote_detail::json{{"query", query}, {"sections", sections}});
    std::vector<double> scores;
    try {
      scores = body.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ProtocolError, "/v1/score", e.what());
    }
    if (scores.size() != sections.size()) throw Error(ErrorKind::ProtocolError, "/v1/score", "score count mismatch");
    for (double s : scores) {
      if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::ProtocolError, "/v1/score", "score outside (0,1)");
    }
    return scores;
  }

  /// Sends `body` and returns the HTTP status without interpreting it.
  int post_status(const std::string& path, const std::string& body) const {
    auto res = client().Post(path, body, "application/json");
    check_transport(res, path);
    return res->status;
  }

 private:
  httplib::Client client() const {
    httplib::Client c(endpoint_);
    c.set_connection_timeout(timeout_s_);
    c.set_read_timeout(timeout_s_);
    return c;
  }

  static void check_transport(const httplib::Result& res, const std::string& path) {
    if (!res) throw Error(ErrorKind::Transport, path, httplib::to_string(res.error()));
  }

  static remote_detail::json parse(const std::string& body, const std::string& path) {
    try {
      return remote_detail::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ProtocolError, path, std::string("invalid JSON: ") + e.what());
    }
  }

  remote_detail::json post(const std::string& path, const remote_detail::json& req) const {
    auto res = client().Post(path, req.dump(), "application/json");
    check_transport(res, path);
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorKind::ServiceError, path, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    return parse(res->body, path);
  }

  std::string endpoint_;
  int timeout_s_;
};

/// EncoderBackend served by a remote embedding service.
class RemoteEncoder final : public EncoderBackend {
 public:
  explicit RemoteEncoder(std::string endpoint) : client_(std::move(endpoint)), dim_(client_.health().dim) {}

  Embedding encode_query(const Query& q) const override {
    return client_.embed(Role::query, {remote_detail::item(q)}).front();
  }

  std::vector<Embedding> encode_sections(std::span<const Section> sections) const override {
    std::vector<remote_detail::json> items;
    for (const auto& s : sections) items.push_back(remote_detail::item(s));
    auto out = client_.embed(Role::section, items);
    for (const auto& e : out) {
      if (e.dim() != dim_) throw Error(ErrorKind::ProtocolError, "/v1/embed", "dim differs from /v1/health");
    }
    return out;
  }

  std::size_t dim() const override { return dim_; }

 private:
  RemoteClient client_;
  std::size_t dim_;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Protocol conformance probe for an embedding service.
inline std::vector<CheckResult> sidecar_check(const RemoteClient& c) {
  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, auto&& fn) {
    try {
      std::string detail = fn();
      out.push_back({name, true, std::move(detail)});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  std::size_t dim = 0;
  run("health", [&] {
    const auto h = c.health();
    if (h.status != "ok") throw Error(ErrorKind::ProtocolError, "/v1/health", "status " + h.status);
    dim = h.dim;
    return "model=" + h.model + " dim=" + std::to_string(h.dim);
  });
  const Query q{"probe", "who built this bridge?", {"bridge.jpg"}};
  const Section s1{"s0", "History", {{SegmentKind::text, "The bridge opened in 1890."}}};
  const Section s2{"s1", "Design", {{SegmentKind::image, "bridge.jpg | a bridge"}, {SegmentKind::table, "<table><tr><td>span</td></tr></table>"}}};
  const Section s3{"s2", "", {{SegmentKind::text, "Unrelated text."}}};
  run("embed count and dim", [&] {
    const auto e = c.embed(Role::section, {remote_detail::item(s1), remote_detail::item(s2)});
    for (const auto& v : e) {
      if (v.dim() != dim) throw Error(ErrorKind::ProtocolError, "/v1/embed", "dim differs from /v1/health");
    }
    const auto qe = c.embed(Role::query, {remote_detail::item(q)});
    if (qe.front().dim() != dim) throw Error(ErrorKind::ProtocolError, "/v1/embed", "query dim differs");
    return std::string("2 section + 1 query embeddings of dim ") + std::to_string(dim);
  });
  run("embed deterministic", [&] {
    const auto e = c.embed(Role::section, {remote_detail::item(s1), remote_detail::item(s1)});
    if (e[0].values != e[1].values) throw Error(ErrorKind::ProtocolError, "/v1/embed", "identical items differ");
    return std::string("identical items give identical vectors");
  });
  run("score range", [&] {
    const std::vector<Section> secs{s1, s2, s3};
    const auto scores = c.score(q, secs);
    return std::to_string(scores.size()) + " scores in (0,1)";
  });
  run("rejects bad role", [&] {
    const int st = c.post_status("/v1/embed", R"({"role":"document","items":[{"text":"x","images":[],"tables":[]}]})");
    if (st != 400) throw Error(ErrorKind::ProtocolError, "/v1/embed", "expected 400, got " + std::to_string(st));
    return std::string("400");
  });
  run("rejects empty sections", [&] {
    const int st = c.post_status("/v1/score", R"({"query":{"text":"x","images":[],"tables":[]},"sections":[]})");
    if (st != 400) throw Error(ErrorKind::ProtocolError, "/v1/score", "expected 400, got " + std::to_string(st));
    return std::string("400");
  });
  run("rejects oversize batch", [&] {
    remote_detail::json items = remote_detail::json::array();
    for (std::size_t i = 0; i <= RemoteClient::kMaxItems; ++i) items.push_back(remote_detail::item(s3));
    const int st = c.post_status("/v1/embed", remote_detail::json{{"role", "section"}, {"items", items}}.dump());
    if (st != 413) throw Error(ErrorKind::ProtocolError, "/v1/embed", "expected 413, got " + std::to_string(st));
    return std::string("413");
  });
  return out;
}

}  // namespace interdoc
