#pragma once

#include "sheetaudit/error.hpp"
#include "sheetaudit/grid.hpp"
#include "sheetaudit/modules.hpp"
#include "sheetaudit/report.hpp"

#include <httplib.h>

#include <charconv>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>

namespace sheetaudit {

/// In-memory audit sessions behind an HTTP/JSON API. Each session owns one
/// immutable Workspace plus its mutable curation state; curation changes are
/// serialized per session, reads run concurrently.
class AuditService {
public:
    using Clock = std::chrono::steady_clock;

    explicit AuditService(std::chrono::seconds idle_expiry = std::chrono::minutes(30)) : idle_expiry_(idle_expiry) {}

    void mount(httplib::Server& server) {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
            create_session(req, res);
        }));
        server.Delete(R"(/sessions/([0-9a-f]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(store_mutex_);
            if (sessions_.erase(req.matches[1].str()) == 0) throw Error(ErrorCode::UnknownSession, "no such session");
            res.status = 204;
        }));

        get(server, "grid", [](Session& s, const httplib::Request&) { return grid_json(s.ws->sheet()); });
        get(server, "inspect", [](Session& s, const httplib::Request&) { return report_inspect(*s.ws); });
        get(server, "areas", [](Session& s, const httplib::Request& req) {
            return report_areas(*s.ws, level_param(req, "level", EqLevel::Copy));
        });
        get(server, "classes", [](Session& s, const httplib::Request& req) {
            ClassParams p = class_params(req);
            std::string key = json::params(p).dump();
            {
                std::lock_guard lock(s.cache_mutex);
                if (auto it = s.class_cache.find(key); it != s.class_cache.end()) {
                    Json hit = it->second;
                    hit["timings"] = Json{{"cache", "hit"}};
                    return hit;
                }
            }
            Json report = report_classes(*s.ws, p);
            {
                std::lock_guard lock(s.cache_mutex);
                s.class_cache.emplace(key, report);
            }
            report["timings"] = Json{{"cache", "miss"}};
            return report;
        });
        get(server, "sinks", [](Session& s, const httplib::Request&) { return report_sinks(*s.ws, s.curation); });
        get(server, "modules", [](Session& s, const httplib::Request&) { return report_modules(*s.ws, s.curation); });
        get(server, "diff", [](Session& s, const httplib::Request& req) {
            return report_diff(*s.ws, level_param(req, "fine", EqLevel::Copy),
                               level_param(req, "coarse", EqLevel::Structural));
        });
        get(server, "constants", [](Session& s, const httplib::Request&) { return report_constants(*s.ws); });
        get(server, "trace", [](Session& s, const httplib::Request& req) {
            if (!req.has_param("module")) throw Error(ErrorCode::InvalidParameters, "missing 'module'");
            return report_trace(*s.ws, s.curation, req.get_param_value("module"));
        });

        server.Get(R"(/sessions/([0-9a-f]+)/srg)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto session = lookup(req.matches[1].str());
            std::shared_lock lock(session->mutex);
            CommandOptions opt = srg_options(req);
            if (req.get_param_value("format") == "dot") {
                DotStyle style = req.get_param_value("style") == "plain" ? DotStyle::Plain : DotStyle::Audit;
                res.set_content(to_dot(build_srg(*session->ws, opt, &session->curation), style),
                                "text/vnd.graphviz");
                return;
            }
            send(res, timed([&] { return report_srg(*session->ws, opt, &session->curation); }));
        }));

        server.Post(R"(/sessions/([0-9a-f]+)/sinks/(exclude|restore))",
                    wrap([this](const httplib::Request& req, httplib::Response& res) {
                        auto session = lookup(req.matches[1].str());
                        CellAddr cell = cell_from_body(req.body);
                        std::unique_lock lock(session->mutex);
                        const Ddg& g = session->ws->ddg();
                        if (!g.contains(cell)) throw Error(ErrorCode::NotASink, to_a1(cell) + " is not a current sink");
                        session->curation = req.matches[2].str() == "exclude"
                                              ? exclude_sink(session->curation, g, cell)
                                              : restore_sink(session->curation, g, cell);
                        send(res, timed([&] { return report_sinks(*session->ws, session->curation); }));
                    }));
    }

    std::size_t session_count() const {
        std::lock_guard lock(store_mutex_);
        return sessions_.size();
    }

    static int status_for(ErrorCode code) {
        switch (code) {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownModule: return 404;
        case ErrorCode::NotASink:
        case ErrorCode::NotRestorable: return 409;
        default: return 422;
        }
    }

private:
    struct Session {
        std::string id;
        std::unique_ptr<Workspace> ws;
        SinkCuration curation;
        Clock::time_point created;
        Clock::time_point last_used;
        std::shared_mutex mutex;
        std::mutex cache_mutex;
        std::map<std::string, Json> class_cache;
    };

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static void send(httplib::Response& res, const Json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename Fn>
    static Json timed(Fn&& fn) {
        auto start = Clock::now();
        Json report = fn();
        auto ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        report["timings"]["total_ms"] = ms;
        return report;
    }

    static Handler wrap(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const Error& e) {
                send(res, Json{{"error", json::error(e)}}, status_for(e.code()));
            } catch (const std::exception& e) {
                send(res, Json{{"error", Json{{"code", "Internal"}, {"message", e.what()}}}}, 500);
            }
        };
    }

    template <typename Fn>
    void get(httplib::Server& server, const std::string& leaf, Fn fn) {
        server.Get("/sessions/([0-9a-f]+)/" + leaf, wrap([this, fn](const httplib::Request& req, httplib::Response& res) {
            auto session = lookup(req.matches[1].str());
            std::shared_lock lock(session->mutex);
            send(res, timed([&] { return fn(*session, req); }));
        }));
    }

    std::shared_ptr<Session> lookup(const std::string& id) {
        std::lock_guard lock(store_mutex_);
        expire_locked();
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
        it->second->last_used = Clock::now();
        return it->second;
    }

    void expire_locked() {
        auto now = Clock::now();
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            it = now - it->second->last_used > idle_expiry_ ? sessions_.erase(it) : std::next(it);
        }
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        std::string_view body = req.body;
        auto first = body.find_first_not_of(" \t\r\n");
        bool is_json = req.get_header_value("Content-Type").find("json") != std::string::npos
                    || (first != std::string_view::npos && body[first] == '{');
        auto session = std::make_shared<Session>();
        session->ws = std::make_unique<Workspace>(load_workbook(body, is_json ? WorkbookFormat::Json : WorkbookFormat::Csv));
        session->curation = curate_or_empty(session->ws->ddg());
        session->created = session->last_used = Clock::now();

        std::lock_guard lock(store_mutex_);
        expire_locked();
        do {
            session->id = random_id();
        } while (sessions_.count(session->id));
        sessions_.emplace(session->id, session);

        const Sheet& sheet = session->ws->sheet();
        send(res,
             Json{{"session", session->id},
                  {"sheet", Json{{"name", sheet.name()},
                                 {"digest", sheet_digest(sheet)},
                                 {"cells", sheet.cells().size()},
                                 {"formula_cells", session->ws->parsed().size()}}}},
             201);
    }

    // Cyclic sheets still open a session; curation endpoints then report CyclicDDG.
    static SinkCuration curate_or_empty(const Ddg& g) {
        try {
            return curate_init(g);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CyclicDDG) throw;
            return SinkCuration{sinks(g), {}, {}};
        }
    }

    std::string random_id() {
        static constexpr char hex[] = "0123456789abcdef";
        std::string out;
        for (int i = 0; i < 16; ++i) out.push_back(hex[rng_() & 0xF]);
        return out;
    }

    static Json grid_json(const Sheet& sheet) {
        Json cells = Json::array();
        for (const auto& [addr, content] : sheet.cells()) {
            cells.push_back(Json{{"cell", to_a1(addr)}, {"kind", std::string(to_string(content.kind))}, {"text", content.text}});
        }
        Json extent = nullptr;
        if (auto e = sheet.extent()) extent = Json{{"top_left", to_a1(e->top_left)}, {"bottom_right", to_a1(e->bottom_right)}};
        return Json{{"name", sheet.name()}, {"extent", std::move(extent)}, {"cells", std::move(cells)}};
    }

    static EqLevel level_param(const httplib::Request& req, const char* name, EqLevel fallback) {
        if (!req.has_param(name)) return fallback;
        auto level = parse_level(req.get_param_value(name));
        if (!level) throw Error(ErrorCode::InvalidParameters, std::string("bad level for '") + name + "'");
        return *level;
    }

    static std::optional<std::int32_t> int_param(const httplib::Request& req, const char* name) {
        if (!req.has_param(name)) return std::nullopt;
        std::string text = req.get_param_value(name);
        std::int32_t value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size()) {
            throw Error(ErrorCode::InvalidParameters, std::string("'") + name + "' must be an integer");
        }
        return value;
    }

    static ClassParams class_params(const httplib::Request& req) {
        ClassParams p;
        p.geometry.d_h = int_param(req, "dh").value_or(1);
        p.geometry.d_v = int_param(req, "dv").value_or(0);
        p.geometry.d_man = int_param(req, "dman");
        p.eq_start = level_param(req, "eqStart", EqLevel::Copy);
        p.eq_rest = level_param(req, "eqRest", EqLevel::Copy);
        p.geometry.validate();
        return p;
    }

    static CommandOptions srg_options(const httplib::Request& req) {
        CommandOptions opt;
        std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "modules";
        if (mode == "units") {
            opt.srg_mode = SrgOrigin::Units;
            opt.classes = class_params(req);
        } else if (mode != "modules") {
            throw Error(ErrorCode::InvalidParameters, "mode must be 'units' or 'modules'");
        }
        if (req.has_param("fisheye") && !req.get_param_value("fisheye").empty()) {
            opt.fisheye = req.get_param_value("fisheye");
        }
        return opt;
    }

    static CellAddr cell_from_body(const std::string& body) {
        Json doc = Json::parse(body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("cell") || !doc["cell"].is_string()) {
            throw Error(ErrorCode::InvalidParameters, "body must be {\"cell\": \"<A1>\"}");
        }
        try {
            return parse_a1(doc["cell"].get<std::string>());
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidParameters, e.what());
        }
    }

    std::chrono::seconds idle_expiry_;
    mutable std::mutex store_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mt19937_64 rng_{std::random_device{}()};
};

} // namespace sheetaudit
