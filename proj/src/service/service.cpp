#include "clickmask/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "json.hpp"

#include "clickmask/geometry.hpp"
#include "clickmask/io.hpp"
#include "clickmask/project.hpp"

namespace clickmask {
namespace fs = std::filesystem;
using nlohmann::json;
namespace {

// Error raised by request handlers with an explicit HTTP status.
struct HttpError {
    int status;
    std::string message;
};

[[noreturn]] void fail(int status, const std::string& message) { throw HttpError{status, message}; }

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::ParseError:
        case ErrorCode::CorruptFile:
        case ErrorCode::EmptyInput:
        case ErrorCode::DimensionMismatch:
            return 400;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::UnsupportedFormat:
            return 415;
        case ErrorCode::OutOfRange:
            return 422;
        case ErrorCode::NoPositiveClick:
        case ErrorCode::Conflict:
            return 409;
        case ErrorCode::IoFailure:
            return 507;
        case ErrorCode::SolverNonConvergence:
            return 500;
    }
    return 500;
}

ServiceResponse reply(int status, const json& body) { return ServiceResponse{status, body.dump() + "\n"}; }

ServiceResponse error_reply(int status, const std::string& message) {
    return reply(status, json{{"error", message}, {"status", status}});
}

json rle_json(const LabelMask& mask) {
    const RunLength rle = encode_rle(mask);
    return json{{"counts", rle.counts}, {"size", json::array({rle.height, rle.width})}, {"start_value", 0}};
}

LabelMask rle_from_json(const json& j) {
    if (!j.is_object() || !j.contains("counts") || !j.contains("size"))
        fail(400, "mask payload needs counts and size");
    try {
        if (j.value("start_value", 0) != 0) fail(400, "mask payload must start with a run of zeros");
        RunLength rle;
        rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
        const auto size = j.at("size").get<std::vector<int>>();
        if (size.size() != 2) fail(400, "mask size must be [height, width]");
        rle.height = size[0];
        rle.width = size[1];
        return decode_rle(rle);
    } catch (const json::exception& e) {
        fail(400, std::string("bad mask payload: ") + e.what());
    }
}

json polygon_json(int id, const Polygon& p) {
    json vertices = json::array();
    for (const auto& v : p.vertices) vertices.push_back(json::array({v.x, v.y}));
    return json{{"id", id}, {"category_id", p.category_id}, {"hole", p.hole}, {"vertices", std::move(vertices)}};
}

json category_json(const Category& c) {
    return json{{"id", c.id}, {"comment", c.comment}, {"color", json::array({c.color[0], c.color[1], c.color[2]})}};
}

json layout_json(const GridLayout& g) {
    json patches = json::array();
    for (const auto& p : g.patches)
        patches.push_back(json{{"x", p.x}, {"y", p.y}, {"width", p.width}, {"height", p.height}});
    return json{{"patch_size", g.patch_size}, {"overlap", g.overlap}, {"columns", g.columns},
                {"rows", g.rows}, {"patches", std::move(patches)}};
}

template <class T>
T get_field(const json& body, const char* key) {
    if (!body.contains(key)) fail(400, std::string("missing field '") + key + "'");
    try {
        return body.at(key).get<T>();
    } catch (const json::exception&) {
        fail(400, std::string("bad field '") + key + "'");
    }
}

template <class T>
T get_field(const json& body, const char* key, T fallback) {
    return body.contains(key) ? get_field<T>(body, key) : fallback;
}

EngineParams engine_from(const json& body, EngineParams p) {
    const json& e = body.contains("engine_params") ? body["engine_params"] : json::object();
    if (body.contains("engine")) {
        const auto id = parse_engine_id(get_field<std::string>(body, "engine"));
        if (!id) {
            std::string names;
            for (const auto& n : engine_id_names()) names += (names.empty() ? "" : ", ") + n;
            fail(400, "unknown engine; valid ids: " + names);
        }
        p.engine_id = *id;
    }
    p.seed_radius = get_field<int>(e, "seed_radius", p.seed_radius);
    p.lambda = get_field<double>(e, "lambda", p.lambda);
    p.beta = get_field<double>(e, "beta", p.beta);
    p.edge_prior_weight = get_field<double>(e, "edge_prior_weight", p.edge_prior_weight);
    p.validate();
    return p;
}

PropagationParams propagation_from(const json& body, PropagationParams p) {
    const json& j = body.contains("params") ? body["params"] : json::object();
    p.grid_stride = get_field<int>(j, "grid_stride", p.grid_stride);
    p.patch_size = get_field<int>(j, "patch_size", p.patch_size);
    p.search_window = get_field<int>(j, "search_window", p.search_window);
    p.knn = get_field<int>(j, "knn", p.knn);
    p.tau = get_field<double>(j, "tau", p.tau);
    p.refine_with_graphcut = get_field<bool>(j, "refine_with_graphcut", p.refine_with_graphcut);
    p.refine_lambda = get_field<double>(j, "refine_lambda", p.refine_lambda);
    p.memory_frames = get_field<int>(j, "memory_frames", p.memory_frames);
    p.validate();
    return p;
}

// Fixed-size worker pool for propagation jobs.
class JobQueue {
public:
    explicit JobQueue(int workers) {
        for (int i = 0; i < std::max(1, workers); ++i) threads_.emplace_back([this] { run(); });
    }
    ~JobQueue() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        wake_.notify_all();
        for (auto& t : threads_) t.join();
    }
    void submit(std::function<void()> job) {
        {
            std::lock_guard lock(mutex_);
            jobs_.push_back(std::move(job));
            ++pending_;
        }
        wake_.notify_one();
    }
    void wait_idle() {
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [this] { return pending_ == 0; });
    }

private:
    void run() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
                if (jobs_.empty()) return;
                job = std::move(jobs_.front());
                jobs_.pop_front();
            }
            job();
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) idle_.notify_all();
        }
    }

    std::mutex mutex_;
    std::condition_variable wake_, idle_;
    std::deque<std::function<void()>> jobs_;
    int pending_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

struct FinishedPolygon {
    int id;
    int object_id;
    Polygon polygon;
};

struct Session {
    std::mutex mutex;
    std::string id;
    std::string image_name;
    RasterImage image;
    EngineParams engine;
    std::optional<GridLayout> grid;
    // Current object.
    ClickSet clicks;
    EngineOutput output;
    // Finished objects.
    std::vector<FinishedPolygon> polygons;
    std::vector<Category> categories;
    int next_polygon_id = 1;
    int next_object_id = 1;

    void reset_object() {
        clicks = ClickSet{};
        output = EngineOutput{LabelMask(image.width(), image.height()),
                              std::vector<double>(image.pixel_count(), 0.0), EdgeMap(image.width(), image.height())};
    }
};

struct PropagationStatus {
    std::string state = "idle";  // idle | running | done | failed
    int epoch = 0;
    int done = 0;
    int total = 0;
    std::string error;
    std::vector<int> references;  // reference frames of this epoch
};

struct Sequence {
    std::mutex mutex;
    std::string id;
    FrameSequence frames;
    ReferenceSet references;
    std::vector<FusedFrame> results;
    int results_epoch = 0;
    std::shared_ptr<const PropagationStatus> status = std::make_shared<PropagationStatus>();

    std::shared_ptr<const PropagationStatus> snapshot() const { return std::atomic_load(&status); }
    void publish(PropagationStatus s) { std::atomic_store(&status, std::shared_ptr<const PropagationStatus>(std::make_shared<PropagationStatus>(std::move(s)))); }
};

struct Route {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

Route parse_target(std::string_view target) {
    Route r;
    const auto q = target.find('?');
    std::string_view path = target.substr(0, q);
    if (q != std::string_view::npos) {
        std::string_view rest = target.substr(q + 1);
        while (!rest.empty()) {
            const auto amp = rest.find('&');
            const std::string_view kv = rest.substr(0, amp);
            const auto eq = kv.find('=');
            r.query[std::string(kv.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(kv.substr(eq + 1));
            rest = amp == std::string_view::npos ? std::string_view{} : rest.substr(amp + 1);
        }
    }
    while (!path.empty()) {
        const auto slash = path.find('/');
        if (slash != 0) r.segments.emplace_back(path.substr(0, slash));
        path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
    }
    return r;
}

int parse_index(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(404, std::string("bad ") + what + " '" + s + "'");
    }
}

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    std::shared_mutex registry_mutex;
    std::map<std::string, std::shared_ptr<Session>> sessions;
    std::map<std::string, std::shared_ptr<Sequence>> sequences;
    std::atomic<std::uint64_t> next_id;
    JobQueue jobs;

    explicit Impl(ServiceConfig c) : config(std::move(c)), next_id(config.id_seed), jobs(config.workers) {
        config.engine.validate();
        config.propagation.validate();
    }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : config.image_root / path;
    }

    std::shared_ptr<Session> session(const std::string& id) {
        std::shared_lock lock(registry_mutex);
        const auto it = sessions.find(id);
        if (it == sessions.end()) fail(404, "no session '" + id + "'");
        return it->second;
    }

    std::shared_ptr<Sequence> sequence(const std::string& id) {
        std::shared_lock lock(registry_mutex);
        const auto it = sequences.find(id);
        if (it == sequences.end()) fail(404, "no sequence '" + id + "'");
        return it->second;
    }

    ServiceResponse dispatch(std::string_view method, const Route& r, std::string_view body, std::string_view content_type) {
        const auto& s = r.segments;
        const auto is = [&](std::string_view m, std::size_t n) { return method == m && s.size() == n; };
        if (s.empty()) fail(404, "unknown resource");
        if (s[0] == "health" && is("GET", 1)) return reply(200, json{{"status", "ok"}});
        if (s[0] == "engines" && is("GET", 1)) return reply(200, json{{"engines", engine_id_names()}});
        if (s[0] == "sessions") {
            if (is("POST", 1)) return create_session(body, content_type);
            if (s.size() < 2) fail(404, "unknown resource");
            auto sess = session(s[1]);
            if (is("DELETE", 2)) return close_session(sess);
            std::lock_guard lock(sess->mutex);
            if (is("GET", 2)) return reply(200, session_json(*sess));
            if (is("POST", 3) && s[2] == "clicks") return add_click(*sess, parse_body(body));
            if (is("POST", 3) && s[2] == "undo") return undo(*sess);
            if (is("GET", 3) && s[2] == "mask") return reply(200, object_json(*sess));
            if (is("POST", 3) && s[2] == "finish") return finish(*sess, parse_body(body));
            if (is("GET", 3) && s[2] == "polygons") return reply(200, polygons_json(*sess));
            if (is("PATCH", 4) && s[2] == "polygons") return edit_polygon(*sess, parse_index(s[3], "polygon id"), parse_body(body));
            if (is("DELETE", 4) && s[2] == "polygons") return delete_polygon(*sess, parse_index(s[3], "polygon id"));
            if (is("GET", 3) && s[2] == "categories") return reply(200, categories_json(*sess));
            if (is("POST", 3) && s[2] == "categories") return add_category(*sess, parse_body(body));
            if (is("DELETE", 4) && s[2] == "categories")
                return delete_category(*sess, parse_index(s[3], "category id"), r.query.count("force") && r.query.at("force") == "true");
            if (is("POST", 3) && s[2] == "save") return save(*sess, parse_body(body));
        }
        if (s[0] == "sequences") {
            if (is("POST", 1)) return create_sequence(parse_body(body));
            if (s.size() < 2) fail(404, "unknown resource");
            auto seq = sequence(s[1]);
            if (is("GET", 3) && s[2] == "status") return reply(200, status_json(*seq, *seq->snapshot()));
            std::lock_guard lock(seq->mutex);
            if (is("GET", 2)) return reply(200, sequence_json(*seq));
            if (is("POST", 3) && s[2] == "references") return add_reference(*seq, parse_body(body));
            if (is("POST", 3) && s[2] == "propagate") return start_propagation(seq, parse_body(body));
            if (is("GET", 5) && s[2] == "frames" && s[4] == "mask") return frame_mask(*seq, parse_index(s[3], "frame index"));
        }
        fail(404, "unknown resource");
    }

    static json parse_body(std::string_view body) {
        if (body.empty()) return json::object();
        try {
            json j = json::parse(body);
            if (!j.is_object()) fail(400, "request body must be a JSON object");
            return j;
        } catch (const json::parse_error& e) {
            fail(400, std::string("malformed JSON: ") + e.what());
        }
    }

    std::string new_id(const char* prefix) { return prefix + std::to_string(++next_id); }

    // Sessions ------------------------------------------------------------------

    ServiceResponse create_session(std::string_view body, std::string_view content_type) {
        auto sess = std::make_shared<Session>();
        json params = json::object();
        if (content_type.starts_with("application/json") || content_type.empty()) {
            params = parse_body(body);
            const std::string path = get_field<std::string>(params, "image_path");
            const fs::path full = resolve(path);
            try {
                sess->image = load_image(full);
            } catch (const Error& e) {
                fail(e.code() == ErrorCode::UnsupportedFormat ? 415 : 400, e.what());
            }
            sess->image_name = fs::path(path).filename().string();
        } else {
            // Bytes declared as a supported type but not decodable are a bad
            // request; anything else is an unsupported media type.
            const bool declared_supported = content_type.starts_with("image/png") ||
                                            content_type.starts_with("image/x-portable") ||
                                            content_type.starts_with("application/octet-stream");
            try {
                sess->image = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
            } catch (const Error& e) {
                fail(e.code() == ErrorCode::UnsupportedFormat && !declared_supported ? 415 : 400, e.what());
            }
        }
        sess->engine = engine_from(params, config.engine);
        sess->id = new_id("s");
        if (sess->image_name.empty()) sess->image_name = sess->id + ".png";
        if (params.contains("categories_path")) {
            sess->categories = load_categories(resolve(get_field<std::string>(params, "categories_path")));
        } else {
            sess->categories = {Category{1, "object", voc_palette(2)[1], false}};
        }
        if (needs_grid(sess->image.width(), sess->image.height()))
            sess->grid = grid_layout(sess->image.width(), sess->image.height());
        sess->reset_object();
        json out{{"session_id", sess->id},
                 {"width", sess->image.width()},
                 {"height", sess->image.height()},
                 {"channels", sess->image.channels()},
                 {"bit_depth", sess->image.bit_depth()},
                 {"engine", std::string(to_string(sess->engine.engine_id))}};
        if (sess->grid) out["grid"] = layout_json(*sess->grid);
        {
            std::unique_lock lock(registry_mutex);
            sessions[sess->id] = sess;
        }
        return reply(201, out);
    }

    ServiceResponse close_session(const std::shared_ptr<Session>& sess) {
        std::lock_guard lock(sess->mutex);
        json out{{"session_id", sess->id}, {"saved", json::array()}};
        if (config.autosave && !config.save_directory.empty() && !sess->polygons.empty()) {
            for (const auto& p : autosave(project_of(*sess), 0)) out["saved"].push_back(p.string());
        }
        std::unique_lock registry(registry_mutex);
        sessions.erase(sess->id);
        return reply(200, out);
    }

    json object_json(const Session& sess) const {
        const LabelMask& m = sess.output.mask;
        double fg_conf = 0.0;
        std::size_t fg = 0;
        for (std::size_t i = 0; i < m.pixel_count(); ++i)
            if (m[i]) ++fg, fg_conf += sess.output.confidence[i];
        return json{{"mask", rle_json(m)},
                    {"clicks", sess.clicks.size()},
                    {"confidence", {{"foreground_pixels", fg}, {"mean_foreground", fg ? fg_conf / static_cast<double>(fg) : 0.0}}}};
    }

    json polygons_json(const Session& sess) const {
        json list = json::array();
        for (const auto& p : sess.polygons) {
            json j = polygon_json(p.id, p.polygon);
            j["object_id"] = p.object_id;
            list.push_back(std::move(j));
        }
        return json{{"polygons", std::move(list)}};
    }

    json categories_json(const Session& sess) const {
        json list = json::array();
        for (const auto& c : sess.categories)
            if (!c.deleted) list.push_back(category_json(c));
        return json{{"categories", std::move(list)}};
    }

    json session_json(const Session& sess) const {
        json out = object_json(sess);
        out["session_id"] = sess.id;
        out["width"] = sess.image.width();
        out["height"] = sess.image.height();
        out["polygons"] = polygons_json(sess)["polygons"];
        out["categories"] = categories_json(sess)["categories"];
        if (sess.grid) out["grid"] = layout_json(*sess.grid);
        return out;
    }

    ServiceResponse add_click(Session& sess, const json& body) {
        const int x = get_field<int>(body, "x"), y = get_field<int>(body, "y");
        const std::string polarity = get_field<std::string>(body, "polarity", std::string("positive"));
        if (polarity != "positive" && polarity != "negative") fail(400, "polarity must be positive or negative");
        if (x < 0 || y < 0 || x >= sess.image.width() || y >= sess.image.height())
            fail(422, "click (" + std::to_string(x) + "," + std::to_string(y) + ") outside the image");
        if (sess.clicks.empty() && polarity == "negative") fail(409, "the first click of an object must be positive");
        ClickSet next = sess.clicks;
        next.add(x, y, polarity == "positive" ? Polarity::Positive : Polarity::Negative);
        sess.output = segment(sess.engine, sess.image, next, sess.output.edge);
        sess.clicks = std::move(next);
        return reply(200, object_json(sess));
    }

    ServiceResponse undo(Session& sess) {
        if (sess.clicks.empty()) fail(409, "nothing to undo");
        const ClickSet remaining = sess.clicks.prefix(sess.clicks.size() - 1);
        // Replay the prior chain from zeros so the result matches a fresh session.
        sess.reset_object();
        for (std::size_t k = 1; k <= remaining.size(); ++k)
            sess.output = segment(sess.engine, sess.image, remaining.prefix(k), sess.output.edge);
        sess.clicks = remaining;
        return reply(200, object_json(sess));
    }

    const Category& live_category(const Session& sess, int id) const {
        for (const auto& c : sess.categories)
            if (c.id == id && !c.deleted) return c;
        fail(422, "unknown category " + std::to_string(id));
    }

    ServiceResponse finish(Session& sess, const json& body) {
        if (sess.output.mask.empty_foreground()) fail(409, "current mask is empty");
        const int category = get_field<int>(body, "category_id", sess.categories.empty() ? 1 : sess.categories.front().id);
        live_category(sess, category);
        const double epsilon = get_field<double>(body, "epsilon", kDefaultEpsilon);
        if (!(epsilon >= 0.0)) fail(400, "epsilon must be non-negative");
        const int object_id = sess.next_object_id++;
        json list = json::array();
        for (auto& p : extract_polygons(sess.output.mask, epsilon, category)) {
            const int id = sess.next_polygon_id++;
            list.push_back(polygon_json(id, p));
            sess.polygons.push_back(FinishedPolygon{id, object_id, std::move(p)});
        }
        sess.reset_object();
        return reply(200, json{{"object_id", object_id}, {"polygons", std::move(list)}});
    }

    FinishedPolygon& find_polygon(Session& sess, int id) {
        for (auto& p : sess.polygons)
            if (p.id == id) return p;
        fail(404, "no polygon " + std::to_string(id));
    }

    ServiceResponse edit_polygon(Session& sess, int id, const json& body) {
        FinishedPolygon& fp = find_polygon(sess, id);
        const std::string op = get_field<std::string>(body, "op");
        const auto index = get_field<std::size_t>(body, "index");
        try {
            if (op == "move") {
                const Point p{get_field<double>(body, "x"), get_field<double>(body, "y")};
                fp.polygon = move_vertex(fp.polygon, index, p, sess.image.width(), sess.image.height());
            } else if (op == "delete") {
                fp.polygon = delete_vertex(fp.polygon, index);
            } else if (op == "insert") {
                const Point p{get_field<double>(body, "x"), get_field<double>(body, "y")};
                fp.polygon = insert_vertex_on_edge(fp.polygon, index, p);
            } else {
                fail(400, "op must be move, delete or insert");
            }
        } catch (const Error& e) {
            fail(422, e.what());
        }
        json out = polygon_json(fp.id, fp.polygon);
        out["object_id"] = fp.object_id;
        return reply(200, out);
    }

    ServiceResponse delete_polygon(Session& sess, int id) {
        find_polygon(sess, id);
        std::erase_if(sess.polygons, [&](const FinishedPolygon& p) { return p.id == id; });
        return reply(200, polygons_json(sess));
    }

    ServiceResponse add_category(Session& sess, const json& body) {
        Category c;
        c.id = get_field<int>(body, "id");
        c.comment = get_field<std::string>(body, "comment", std::string());
        if (c.id <= 0 || c.id > 255) fail(400, "category id must be in 1..255");
        if (c.comment.find_first_of("|\n\r") != std::string::npos) fail(400, "comment may not contain '|' or line breaks");
        const auto color = get_field<std::vector<int>>(body, "color", {});
        if (color.empty()) {
            c.color = voc_palette(256)[static_cast<std::size_t>(c.id)];
        } else {
            if (color.size() != 3) fail(400, "color must be [r, g, b]");
            for (int k = 0; k < 3; ++k) {
                if (color[k] < 0 || color[k] > 255) fail(400, "color components must be 0-255");
                c.color[k] = static_cast<std::uint8_t>(color[k]);
            }
        }
        for (auto& existing : sess.categories) {
            if (existing.id != c.id) continue;
            if (!existing.deleted) fail(409, "category " + std::to_string(c.id) + " already exists");
            existing = c;
            return reply(201, category_json(c));
        }
        sess.categories.push_back(c);
        return reply(201, category_json(c));
    }

    ServiceResponse delete_category(Session& sess, int id, bool force) {
        live_category(sess, id);
        const bool in_use = std::any_of(sess.polygons.begin(), sess.polygons.end(),
                                        [&](const FinishedPolygon& p) { return p.polygon.category_id == id; });
        if (in_use && !force) fail(409, "category " + std::to_string(id) + " is in use; repeat with ?force=true to delete its polygons");
        std::erase_if(sess.polygons, [&](const FinishedPolygon& p) { return p.polygon.category_id == id; });
        for (auto& c : sess.categories)
            if (c.id == id) c.deleted = true;
        return reply(200, categories_json(sess));
    }

    ProjectState project_of(const Session& sess) const {
        ProjectState project;
        project.categories = sess.categories;
        project.settings.save_directory = config.save_directory;
        ImageEntry& entry = project.add_image(sess.image_name, sess.image.width(), sess.image.height());
        for (const auto& p : sess.polygons) entry.polygons.push_back(p.polygon);
        entry.annotated = !entry.polygons.empty();
        return project;
    }

    ServiceResponse save(Session& sess, const json& body) {
        SaveFormats formats;
        formats.grayscale = get_field<bool>(body, "grayscale", true);
        formats.pseudocolor = get_field<bool>(body, "pseudocolor", false);
        formats.coco = get_field<bool>(body, "coco", false);
        const bool categories = get_field<bool>(body, "categories", false);
        fs::path directory = body.contains("directory") ? resolve(get_field<std::string>(body, "directory")) : config.save_directory;
        if (directory.empty()) fail(400, "no save directory configured or given");
        ProjectState project = project_of(sess);
        // An unfinished object is saved as if finished with the first live category.
        if (project.images[0].polygons.empty() && !sess.output.mask.empty_foreground()) {
            const auto live = std::find_if(sess.categories.begin(), sess.categories.end(), [](const Category& c) { return !c.deleted; });
            if (live == sess.categories.end()) fail(409, "no live category to save the mask with");
            project.images[0].polygons = extract_polygons(sess.output.mask, kDefaultEpsilon, live->id);
        }
        if (project.images[0].polygons.empty()) fail(409, "nothing to save");
        json paths = json::array();
        try {
            for (const auto& p : save_image_annotations(project, 0, directory, formats)) paths.push_back(p.string());
            if (categories) {
                const fs::path p = directory / "categories.txt";
                save_categories(project.categories, p);
                paths.push_back(p.string());
            }
        } catch (const Error& e) {
            fail(e.code() == ErrorCode::IoFailure ? 507 : status_for(e.code()), e.what());
        }
        return reply(200, json{{"paths", std::move(paths)}});
    }

    // Sequences -----------------------------------------------------------------

    ServiceResponse create_sequence(const json& body) {
        auto seq = std::make_shared<Sequence>();
        try {
            if (body.contains("frames_dir")) {
                seq->frames = load_frames(resolve(get_field<std::string>(body, "frames_dir")));
            } else if (body.contains("volume")) {
                seq->frames = volume_to_frames(load_volume(resolve(get_field<std::string>(body, "volume"))),
                                               get_field<int>(body, "axis", 2));
            } else if (body.contains("slices_dir")) {
                seq->frames = volume_to_frames(load_volume_slices(resolve(get_field<std::string>(body, "slices_dir"))),
                                               get_field<int>(body, "axis", 2));
            } else {
                fail(400, "give frames_dir, volume or slices_dir");
            }
        } catch (const Error& e) {
            fail(e.code() == ErrorCode::UnsupportedFormat ? 415 : 400, e.what());
        }
        seq->id = new_id("v");
        const json out = sequence_json(*seq);
        std::unique_lock lock(registry_mutex);
        sequences[seq->id] = seq;
        return reply(201, out);
    }

    json sequence_json(const Sequence& seq) const {
        json refs = json::array();
        for (const auto& [k, m] : seq.references) refs.push_back(k);
        return json{{"sequence_id", seq.id},
                    {"frames", seq.frames.size()},
                    {"width", seq.frames.frames[0].width()},
                    {"height", seq.frames.frames[0].height()},
                    {"references", std::move(refs)}};
    }

    json status_json(const Sequence& seq, const PropagationStatus& st) const {
        json frames = json::array();
        for (int k = 0; k < static_cast<int>(seq.frames.size()); ++k) {
            const bool ref = std::find(st.references.begin(), st.references.end(), k) != st.references.end();
            frames.push_back(ref ? "reference" : st.state == "done" ? "done" : "pending");
        }
        json out{{"state", st.state}, {"epoch", st.epoch}, {"done", st.done}, {"total", st.total}, {"frames", std::move(frames)}};
        if (!st.error.empty()) out["error"] = st.error;
        return out;
    }

    ServiceResponse add_reference(Sequence& seq, const json& body) {
        const int frame = get_field<int>(body, "frame");
        if (frame < 0 || frame >= static_cast<int>(seq.frames.size())) fail(404, "frame " + std::to_string(frame) + " out of range");
        LabelMask mask;
        if (body.contains("mask")) {
            mask = rle_from_json(body["mask"]);
        } else if (body.contains("mask_path")) {
            try {
                mask = read_mask(resolve(get_field<std::string>(body, "mask_path")));
            } catch (const Error& e) {
                fail(400, e.what());
            }
        } else {
            fail(400, "give mask or mask_path");
        }
        const RasterImage& img = seq.frames.frames[static_cast<std::size_t>(frame)];
        if (mask.width() != img.width() || mask.height() != img.height()) fail(422, "mask size differs from the frame");
        seq.references[frame] = std::move(mask);
        return reply(201, sequence_json(seq));
    }

    ServiceResponse start_propagation(const std::shared_ptr<Sequence>& seq, const json& body) {
        if (seq->references.empty()) fail(409, "add a reference frame before propagating");
        const auto current = seq->snapshot();
        if (current->state == "running") fail(409, "propagation already running");
        const PropagationParams params = propagation_from(body, config.propagation);
        PropagationStatus st;
        st.state = "running";
        st.epoch = current->epoch + 1;
        for (const auto& [k, m] : seq->references) st.references.push_back(k);
        seq->publish(st);
        jobs.submit([seq, params, st, refs = seq->references] {
            PropagationStatus progress = st;
            try {
                auto out = propagate(seq->frames, refs, params, [&](int done, int total) {
                    progress.done = done;
                    progress.total = total;
                    seq->publish(progress);
                });
                std::lock_guard lock(seq->mutex);
                seq->results = std::move(out);
                seq->results_epoch = st.epoch;
                progress.state = "done";
                seq->publish(progress);
            } catch (const std::exception& e) {
                progress.state = "failed";
                progress.error = e.what();
                seq->publish(progress);
            }
        });
        return reply(202, status_json(*seq, st));
    }

    ServiceResponse frame_mask(Sequence& seq, int frame) {
        if (frame < 0 || frame >= static_cast<int>(seq.frames.size())) fail(404, "frame " + std::to_string(frame) + " out of range");
        if (seq.results.empty()) {
            const auto it = seq.references.find(frame);
            if (it == seq.references.end()) fail(409, "frame " + std::to_string(frame) + " has not been propagated");
            return reply(200, json{{"frame", frame}, {"mask", rle_json(it->second)}, {"epoch", 0},
                                   {"source_reference", frame}, {"mean_confidence", 1.0}});
        }
        const FusedFrame& f = seq.results[static_cast<std::size_t>(frame)];
        double mean = 0.0;
        for (double c : f.confidence) mean += c;
        mean /= static_cast<double>(std::max<std::size_t>(1, f.confidence.size()));
        return reply(200, json{{"frame", frame}, {"mask", rle_json(f.mask)}, {"epoch", seq.results_epoch},
                               {"source_reference", f.source_reference}, {"mean_confidence", mean}});
    }
};

RunLength encode_rle(const LabelMask& mask) {
    RunLength rle;
    rle.width = mask.width();
    rle.height = mask.height();
    std::uint8_t value = 0;
    std::uint32_t run = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        const std::uint8_t v = mask[i] != 0;
        if (v != value) {
            rle.counts.push_back(run);
            run = 0;
            value = v;
        }
        ++run;
    }
    rle.counts.push_back(run);
    return rle;
}

LabelMask decode_rle(const RunLength& rle) {
    if (rle.width <= 0 || rle.height <= 0) throw Error(ErrorCode::InvalidArgument, "run-length size must be positive");
    LabelMask mask(rle.width, rle.height);
    std::size_t pos = 0;
    std::uint16_t value = 0;
    for (auto run : rle.counts) {
        if (run > mask.pixel_count() - pos) throw Error(ErrorCode::InvalidArgument, "run lengths exceed the mask size");
        for (std::uint32_t k = 0; k < run; ++k) mask[pos++] = value;
        value = 1 - value;
    }
    if (pos != mask.pixel_count()) throw Error(ErrorCode::InvalidArgument, "run lengths do not cover the mask");
    return mask;
}

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() = default;

ServiceResponse Service::handle(std::string_view method, std::string_view target, std::string_view body,
                                std::string_view content_type) {
    try {
        return impl_->dispatch(method, parse_target(target), body, content_type);
    } catch (const HttpError& e) {
        return error_reply(e.status, e.message);
    } catch (const Error& e) {
        return error_reply(status_for(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

void Service::wait_idle() { impl_->jobs.wait_idle(); }

}  // namespace clickmask
