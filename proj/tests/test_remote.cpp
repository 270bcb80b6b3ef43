#include <catch_amalgamated.hpp>

#include <thread>

#include "interdoc/interdoc.hpp"
#include "interdoc/remote.hpp"
#include "support.hpp"

using namespace interdoc;
using json = nlohmann::json;

namespace {

/// In-process embedding service. Vectors come from a fixed random linear
/// encoder over the item text; scores are a squashed cosine.
class StubService {
 public:
  enum class Fault { none, drop_embedding, short_vector };

  explicit StubService(Fault fault = Fault::none) : fault_(fault), params_(EncoderParams::init(kDim, 1024, 7, false)) {
    server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}, {"model", "stub"}, {"dim", kDim}}.dump(), "application/json");
    });
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) { embed(req, res); });
    server_.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) { score(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubService() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  static constexpr std::uint32_t kDim = 16;

 private:
  std::vector<float> vec(const json& item, Role role) const {
    const std::string text = item.at("text").get<std::string>();
    const auto fv = role == Role::query ? hash_features(tokenize_query(Query{"q", text, {}}), params_.features)
                                        : hash_features(tokenize_section(support::text_section("s", "", text)), params_.features);
    return encode(params_, fv, role).values;
  }

  static void fail(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  }

  void embed(const httplib::Request& req, httplib::Response& res) const {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return fail(res, 400, "bad json");
    }
    if (!body.contains("role") || !body.contains("items") || !body["items"].is_array()) return fail(res, 400, "schema");
    const auto role_name = body["role"].get<std::string>();
    if (role_name != "query" && role_name != "section") return fail(res, 400, "role");
    if (body["items"].empty()) return fail(res, 400, "empty");
    if (body["items"].size() > 64) return fail(res, 413, "too many items");
    json out = json::array();
    for (const auto& item : body["items"]) {
      auto v = vec(item, role_name == "query" ? Role::query : Role::section);
      if (fault_ == Fault::short_vector) v.pop_back();
      out.push_back(v);
    }
    if (fault_ == Fault::drop_embedding) out.erase(out.size() - 1);
    res.set_content(json{{"dim", kDim}, {"embeddings", out}}.dump(), "application/json");
  }

  void score(const httplib::Request& req, httplib::Response& res) const {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return fail(res, 400, "bad json");
    }
    if (!body.contains("sections") || !body["sections"].is_array() || body["sections"].empty()) return fail(res, 400, "sections");
    const auto q = vec(body.at("query"), Role::query);
    json scores = json::array();
    for (const auto& s : body["sections"]) {
      const auto v = vec(s, Role::section);
      double dot = 0, nq = 0, ns = 0;
      for (std::size_t i = 0; i < kDim; ++i) {
        dot += q[i] * v[i];
        nq += q[i] * q[i];
        ns += v[i] * v[i];
      }
      const double c = nq > 0 && ns > 0 ? dot / std::sqrt(nq * ns) : 0.0;
      scores.push_back(sigmoid(2.0 * c));
    }
    res.set_content(json{{"scores", scores}}.dump(), "application/json");
  }

  Fault fault_;
  EncoderParams params_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

json text_item(const std::string& text) { return json{{"text", text}, {"images", json::array()}, {"tables", json::array()}}; }

}  // namespace

TEST_CASE("a conformant service passes every check") {
  StubService stub;
  const auto results = sidecar_check(RemoteClient(stub.endpoint(), 5));
  REQUIRE(results.size() == 7);
  for (const auto& r : results) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("one embedding per item, across chunk boundaries") {
  StubService stub;
  RemoteClient c(stub.endpoint(), 5);
  std::vector<json> items;
  for (int i = 0; i < 130; ++i) items.push_back(text_item("item " + std::to_string(i)));
  const auto e = c.embed(Role::section, items);
  REQUIRE(e.size() == 130);
  // Order survives chunking: item 100 alone gives the same vector.
  CHECK(c.embed(Role::section, {items[100]}).front().values == e[100].values);
  for (const auto& v : e) CHECK(v.dim() == StubService::kDim);
}

TEST_CASE("a missing embedding is a protocol error") {
  StubService stub(StubService::Fault::drop_embedding);
  RemoteClient c(stub.endpoint(), 5);
  CHECK(kind_of([&] { c.embed(Role::query, {text_item("a"), text_item("b")}); }) == ErrorKind::ProtocolError);
  const auto results = sidecar_check(c);
  CHECK_FALSE(results[1].pass);
}

TEST_CASE("a vector shorter than the declared dim is a protocol error") {
  StubService stub(StubService::Fault::short_vector);
  RemoteClient c(stub.endpoint(), 5);
  CHECK(kind_of([&] { c.embed(Role::query, {text_item("a")}); }) == ErrorKind::ProtocolError);
}

TEST_CASE("service rejections surface as service errors") {
  StubService stub;
  RemoteClient c(stub.endpoint(), 5);
  CHECK(kind_of([&] { c.score_raw(text_item("q"), json::array()); }) == ErrorKind::ServiceError);
  CHECK(c.post_status("/v1/embed", "{not json") == 400);
}

TEST_CASE("scores come back one per section inside (0, 1)") {
  StubService stub;
  RemoteClient c(stub.endpoint(), 5);
  const std::vector<Section> secs{support::text_section("a", "", "x y"), support::text_section("b", "", "z"),
                                  support::text_section("c", "h", "x")};
  const auto s = c.score(Query{"q", "x", {}}, secs);
  REQUIRE(s.size() == 3);
  for (double v : s) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("an unreachable endpoint is a transport error") {
  // Bind and release a port so nothing listens on it.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  RemoteClient c("http://127.0.0.1:" + std::to_string(port), 2);
  CHECK(kind_of([&] { c.health(); }) == ErrorKind::Transport);
  const auto results = sidecar_check(c);
  REQUIRE(results.size() == 7);
  CHECK(results[0].name == "health");
  for (const auto& r : results) {
    CHECK_FALSE(r.pass);
    CHECK_FALSE(r.name.empty());
  }
}

TEST_CASE("retrieval over 20 documents through the remote encoder") {
  StubService stub;
  const auto s = support::separable(20, 2);
  RemoteEncoder backend(stub.endpoint());
  CHECK(backend.dim() == StubService::kDim);
  const auto index = build_index(s.corpus, backend);
  CHECK(index.size() == 20);
  const auto r = run_document_eval(index, backend, s.queries, document_level(s.qrels), {1, 10, 20});
  CHECK(r.metric("R@20") == 1.0);
  CHECK(report_invariants_hold(r));
}
