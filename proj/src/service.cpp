#include "vellum/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "vellum/features.hpp"
#include "vellum/io.hpp"
#include "vellum/manifest.hpp"
#include "vellum/osmosis.hpp"
#include "vellum/segmentation.hpp"
#include "vellum/tv_inpaint.hpp"

namespace vellum {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::string>& param_section()
{
    static const std::map<std::string, std::string> m{
        {"D1", "chan_vese"}, {"labels", "kmeans"}, {"D", "refine"}, {"tv", "tv"}, {"exemplar", "exemplar"}};
    return m;
}

double segment_distance2(double px, double py, Pixel a, Pixel b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) {
        t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
    }
    const double ex = px - (a.x + t * dx);
    const double ey = py - (a.y + t * dy);
    return ex * ex + ey * ey;
}

std::string hash_text(const std::string& s)
{
    return io::sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string random_id()
{
    std::random_device rd;
    std::string out;
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 32; ++i) {
        out.push_back(hex[rd() & 15u]);
    }
    return out;
}

bool plausible_id(const std::string& id)
{
    return !id.empty() && id.size() <= 64
        && std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

json seeds_json(const std::vector<Pixel>& seeds)
{
    json a = json::array();
    for (const Pixel& p : seeds) {
        a.push_back({p.x, p.y});
    }
    return a;
}

Image as_rgb(const Image& img)
{
    if (img.channels() == 3) {
        return img;
    }
    Image out(img.width(), img.height(), 3, ColorSpace::SRGB);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = img.at(x, y, std::min(c, img.channels() - 1));
            }
        }
    }
    return out;
}

} // namespace

void paint_strokes(AnnotationMask& mask, std::span<const Stroke> strokes)
{
    for (const Stroke& s : strokes) {
        if (s.points.empty()) {
            continue;
        }
        const double r = s.radius;
        const double r2 = r * r;
        int x0 = s.points[0].x, x1 = x0, y0 = s.points[0].y, y1 = y0;
        for (const Pixel& p : s.points) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        const int reach = static_cast<int>(std::ceil(r));
        for (int y = std::max(0, y0 - reach); y <= std::min(mask.height() - 1, y1 + reach); ++y) {
            for (int x = std::max(0, x0 - reach); x <= std::min(mask.width() - 1, x1 + reach); ++x) {
                bool hit = false;
                if (s.points.size() == 1) {
                    hit = segment_distance2(x, y, s.points[0], s.points[0]) <= r2;
                }
                for (std::size_t i = 1; i < s.points.size() && !hit; ++i) {
                    hit = segment_distance2(x, y, s.points[i - 1], s.points[i]) <= r2;
                }
                if (hit) {
                    mask(x, y) = s.label;
                }
            }
        }
    }
}

std::vector<Stroke> strokes_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("strokes") || !j["strokes"].is_array()) {
        throw ServiceError(400, "expected {\"strokes\": [...]}");
    }
    std::vector<Stroke> out;
    for (const json& s : j["strokes"]) {
        Stroke st;
        if (!s.is_object() || !s.contains("label") || !s["label"].is_string()) {
            throw ServiceError(400, "stroke without a label name");
        }
        const auto label = label_from_name(s["label"].get<std::string>());
        if (!label) {
            throw ServiceError(400, "unknown label '" + s["label"].get<std::string>() + "'");
        }
        st.label = *label;
        if (!s.contains("points") || !s["points"].is_array() || s["points"].empty()) {
            throw ServiceError(400, "stroke needs a non-empty points array");
        }
        for (const json& p : s["points"]) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
                throw ServiceError(400, "stroke points must be integer [x, y] pairs");
            }
            st.points.push_back({p[0].get<int>(), p[1].get<int>()});
        }
        if (s.contains("radius")) {
            if (!s["radius"].is_number() || !(s["radius"].get<double>() >= 0.0)) {
                throw ServiceError(400, "stroke radius must be a non-negative number");
            }
            st.radius = s["radius"].get<double>();
        }
        out.push_back(std::move(st));
    }
    return out;
}

const char* to_string(JobState s)
{
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    }
    return "unknown";
}

AnnotationService::AnnotationService(ServiceOptions options) : options_(std::move(options))
{
    if (options_.store_dir.empty()) {
        throw InvalidInput("service: store directory required");
    }
    fs::create_directories(options_.store_dir / "objects");
    fs::create_directories(options_.store_dir / "sessions");
    const int n = std::max(1, options_.workers);
    for (int i = 0; i < n; ++i) {
        workers_.emplace_back([this] {
            while (true) {
                std::function<void()> task;
                {
                    std::unique_lock lock(queue_mutex_);
                    queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                    if (queue_.empty()) {
                        return;
                    }
                    task = std::move(queue_.front());
                    queue_.pop_front();
                }
                task();
                std::lock_guard lock(queue_mutex_);
                done_cv_.notify_all();
            }
        });
    }
}

AnnotationService::~AnnotationService()
{
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& t : workers_) {
        t.join();
    }
}

const std::vector<std::string>& AnnotationService::stage_names()
{
    static const std::vector<std::string> names{"D1", "labels", "D", "tv", "exemplar", "osmosis"};
    return names;
}

void AnnotationService::enqueue(std::function<void()> task)
{
    {
        std::lock_guard lock(queue_mutex_);
        queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
}

std::string AnnotationService::put_object(std::span<const std::uint8_t> bytes)
{
    const std::string id = io::sha256_hex(bytes);
    const fs::path path = options_.store_dir / "objects" / id;
    if (!fs::exists(path)) {
        const fs::path tmp = path.string() + ".tmp" + random_id();
        io::write_file(tmp, bytes);
        fs::rename(tmp, path);
    }
    return id;
}

std::vector<std::uint8_t> AnnotationService::get_object(const std::string& id) const
{
    return io::read_file(options_.store_dir / "objects" / id);
}

void AnnotationService::persist(Session& s)
{
    json j;
    j["id"] = s.id;
    j["width"] = s.width;
    j["height"] = s.height;
    j["image"] = s.image;
    j["annotation"] = s.annotation;
    j["infrared"] = s.infrared ? json(*s.infrared) : json(nullptr);
    j["seeds"] = seeds_json(s.seeds);
    json arts = json::object();
    for (const auto& [name, r] : s.artifacts) {
        arts[name] = {{"key", r.key}, {"object", r.object}, {"deps", r.deps}, {"params", r.params}};
    }
    j["artifacts"] = arts;
    const std::string text = j.dump(2);
    const fs::path path = options_.store_dir / "sessions" / (s.id + ".json");
    const fs::path tmp = path.string() + ".tmp";
    io::write_file(tmp, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    fs::rename(tmp, path);
}

std::shared_ptr<AnnotationService::Session> AnnotationService::load(const std::string& id)
{
    const fs::path path = options_.store_dir / "sessions" / (id + ".json");
    if (!fs::exists(path)) {
        return nullptr;
    }
    const auto bytes = io::read_file(path);
    const json j = json::parse(bytes.begin(), bytes.end());
    auto s = std::make_shared<Session>();
    s->id = id;
    s->width = j.at("width").get<int>();
    s->height = j.at("height").get<int>();
    s->image = j.at("image").get<std::string>();
    s->annotation = j.at("annotation").get<std::string>();
    if (!j.at("infrared").is_null()) {
        s->infrared = j.at("infrared").get<std::string>();
    }
    for (const json& p : j.at("seeds")) {
        s->seeds.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    }
    for (const auto& [name, r] : j.at("artifacts").items()) {
        s->artifacts[name] = Record{r.at("key").get<std::string>(), r.at("object").get<std::string>(),
                                    r.at("deps").get<std::set<std::string>>(), r.at("params")};
    }
    return s;
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& id)
{
    if (!plausible_id(id)) {
        throw ServiceError(404, "unknown session '" + id + "'");
    }
    std::lock_guard lock(sessions_mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) {
        return it->second;
    }
    auto s = load(id);
    if (!s) {
        throw ServiceError(404, "unknown session '" + id + "'");
    }
    sessions_[id] = s;
    return s;
}

std::string AnnotationService::create_session(std::span<const std::uint8_t> image_png)
{
    Image img;
    try {
        img = io::decode_image(image_png);
    } catch (const Error& e) {
        throw ServiceError(400, std::string("image upload: ") + e.what());
    }
    auto s = std::make_shared<Session>();
    s->id = random_id();
    s->width = img.width();
    s->height = img.height();
    s->image = put_object(image_png);
    s->annotation = put_object(encode_annotation(AnnotationMask(img.width(), img.height(), Label::Keep)));
    {
        std::lock_guard lock(s->mutex);
        persist(*s);
    }
    std::lock_guard lock(sessions_mutex_);
    sessions_[s->id] = s;
    return s->id;
}

json AnnotationService::state_json(Session& s)
{
    json arts = json::array();
    for (const auto& [name, r] : s.artifacts) {
        arts.push_back(name);
    }
    json fails = json::object();
    for (const auto& [stage, f] : s.failures) {
        fails[stage] = {{"kind", f.first}, {"error", f.second}};
    }
    return {{"id", s.id},         {"width", s.width},          {"height", s.height},
            {"seeds", seeds_json(s.seeds)}, {"has_infrared", s.infrared.has_value()},
            {"artifacts", arts},  {"failures", fails}};
}

json AnnotationService::session_state(const std::string& session)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    return state_json(*s);
}

void AnnotationService::invalidate(Session& s, const std::string& node)
{
    std::vector<std::string> hit;
    for (const auto& [name, r] : s.artifacts) {
        if (r.deps.count(node) != 0) {
            hit.push_back(name);
        }
    }
    for (const std::string& name : hit) {
        if (s.artifacts.erase(name) != 0) {
            invalidate(s, name);
        }
    }
}

json AnnotationService::set_seeds(const std::string& session, const std::vector<Pixel>& seeds)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    for (const Pixel& p : seeds) {
        if (p.x < 0 || p.y < 0 || p.x >= s->width || p.y >= s->height) {
            throw ServiceError(400, "seed (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside the image");
        }
    }
    if (seeds != s->seeds) {
        s->seeds = seeds;
        invalidate(*s, "seeds");
        persist(*s);
    }
    return state_json(*s);
}

json AnnotationService::add_strokes(const std::string& session, const std::vector<Stroke>& strokes)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    AnnotationMask mask = decode_annotation(get_object(s->annotation));
    paint_strokes(mask, strokes);
    const std::string id = put_object(encode_annotation(mask));
    if (id != s->annotation) {
        s->annotation = id;
        invalidate(*s, "annotation");
        persist(*s);
    }
    return state_json(*s);
}

json AnnotationService::set_infrared(const std::string& session, std::span<const std::uint8_t> png)
{
    auto s = find(session);
    Image ir;
    try {
        ir = io::decode_image(png);
    } catch (const Error& e) {
        throw ServiceError(400, std::string("infrared upload: ") + e.what());
    }
    std::lock_guard lock(s->mutex);
    if (ir.width() != s->width || ir.height() != s->height) {
        throw ServiceError(400, "infrared image size differs from the session image");
    }
    const std::string id = put_object(png);
    if (s->infrared != id) {
        s->infrared = id;
        invalidate(*s, "infrared");
        persist(*s);
    }
    return state_json(*s);
}

std::string AnnotationService::node_hash(Session& s, const std::string& node)
{
    if (node == "image") {
        return s.image;
    }
    if (node == "annotation") {
        return s.annotation;
    }
    if (node == "infrared") {
        if (!s.infrared) {
            throw ServiceError(409, "no infrared image uploaded", "infrared");
        }
        return *s.infrared;
    }
    if (node == "seeds") {
        if (s.seeds.empty()) {
            throw ServiceError(409, "no seeds posted", "seeds");
        }
        return hash_text(seeds_json(s.seeds).dump());
    }
    const auto it = s.artifacts.find(node);
    if (it == s.artifacts.end()) {
        throw ServiceError(409, "stage '" + node + "' has not been run", node);
    }
    return it->second.object;
}

AnnotationService::Plan AnnotationService::plan(Session& s, const std::string& stage, const json& params)
{
    if (std::find(stage_names().begin(), stage_names().end(), stage) == stage_names().end()) {
        throw ServiceError(404, "unknown stage '" + stage + "'");
    }
    if (!params.is_null() && !params.is_object()) {
        throw ServiceError(400, "stage parameters must be a JSON object");
    }
    Plan p;
    p.stage = stage;
    json given = params.is_object() ? params : json::object();
    if (stage == "D") {
        const std::string source = given.value("source", s.seeds.empty() ? "annotation" : "segmentation");
        if (source != "segmentation" && source != "annotation") {
            throw ServiceError(400, "D source must be 'segmentation' or 'annotation'");
        }
        given.erase("source");
        p.params["source"] = source;
        p.deps = source == "segmentation" ? std::set<std::string>{"D1", "labels"} : std::set<std::string>{"annotation"};
    } else if (stage == "D1") {
        p.deps = {"image", "seeds"};
    } else if (stage == "labels") {
        p.deps = {"image"};
    } else if (stage == "tv") {
        p.deps = {"image", "D"};
    } else if (stage == "exemplar") {
        p.deps = {"image", "D", "tv"};
    } else {
        p.deps = {"image", "infrared", "annotation"};
    }
    if (const auto sec = param_section().find(stage); sec != param_section().end()) {
        json config = to_json(PipelineConfig{});
        json& section = config[sec->second];
        for (const auto& [k, v] : given.items()) {
            if (!section.contains(k)) {
                throw ServiceError(400, "unknown parameter '" + k + "' for stage " + stage);
            }
            section[k] = v;
        }
        try {
            config_from_json(config);
        } catch (const Error& e) {
            throw ServiceError(400, e.what());
        } catch (const json::exception& e) {
            throw ServiceError(400, std::string("bad parameter value: ") + e.what());
        }
        p.params["config"] = section;
    } else if (!given.empty()) {
        throw ServiceError(400, "stage " + stage + " takes no parameters");
    }
    // Missing dependencies are reported in graph order.
    for (const std::string& d : p.deps) {
        p.upstream[d] = node_hash(s, d);
    }
    std::string key_text = stage + "\n" + p.params.dump() + "\n";
    for (const auto& [node, hash] : p.upstream) {
        key_text += node + "=" + hash + "\n";
    }
    p.key = hash_text(key_text);
    return p;
}

std::string AnnotationService::run_stage(const std::string& session, const std::string& stage, const json& params)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    Plan p = plan(*s, stage, params);
    const std::string job_id = std::to_string(s->next_job++);
    JobStatus st{job_id, stage, JobState::Queued, false, {}, {}};
    if (auto it = s->artifacts.find(stage); it != s->artifacts.end() && it->second.key == p.key) {
        st.state = JobState::Done;
        st.cached = true;
        s->jobs[job_id] = st;
        return job_id;
    }
    s->jobs[job_id] = st;
    enqueue([this, s, job_id, p = std::move(p)]() mutable { execute(s, job_id, std::move(p)); });
    return job_id;
}

void AnnotationService::execute(std::shared_ptr<Session> s, std::string job_id, Plan p)
{
    std::lock_guard run_lock(s->run_mutex);
    std::map<std::string, std::vector<std::uint8_t>> in;
    auto fail = [&](const std::string& kind, const std::string& msg) {
        std::lock_guard lock(s->mutex);
        auto& job = s->jobs[job_id];
        job.state = JobState::Failed;
        job.error = msg;
        job.error_kind = kind;
        s->failures[p.stage] = {kind, msg};
    };
    std::vector<Pixel> seeds;
    {
        std::lock_guard lock(s->mutex);
        s->jobs[job_id].state = JobState::Running;
        try {
            for (const auto& [node, hash] : p.upstream) {
                if (node_hash(*s, node) != hash) {
                    throw ServiceError(409, "input '" + node + "' changed before the job started", node);
                }
                if (node != "seeds") {
                    in[node] = get_object(hash);
                }
            }
        } catch (const ServiceError& e) {
            s->jobs[job_id].state = JobState::Failed;
            s->jobs[job_id].error = e.what();
            s->jobs[job_id].error_kind = "dependency";
            return;
        }
        seeds = s->seeds;
    }

    std::vector<std::uint8_t> out;
    try {
        const PipelineConfig config = p.params.contains("config") ? [&] {
            json c = to_json(PipelineConfig{});
            c[param_section().at(p.stage)] = p.params["config"];
            return config_from_json(c);
        }()
                                                                  : PipelineConfig{};
        const Image img = in.count("image") != 0 ? io::decode_image(in["image"]) : Image{};
        auto domain = [&] { return domain_of(decode_annotation(in["D"])); };
        if (p.stage == "D1") {
            const ChanVeseResult r = chan_vese_segment(img, seeds, config.chan_vese);
            out = encode_annotation(annotation_from_mask(r.region, Label::Training));
        } else if (p.stage == "labels") {
            const LabelResult r = kmeans_label(compute_features(as_rgb(img)), config.kmeans);
            out = io::encode_label_png(r.labels.ids);
        } else if (p.stage == "D") {
            BinaryMask d;
            if (p.params["source"] == "segmentation") {
                const BinaryMask d1 = select_labels(decode_annotation(in["D1"]), {Label::Training});
                const LabelMap labels{io::decode_label_png(in["labels"]), config.kmeans.k};
                d = propagate_training_labels(labels, d1, config.min_overlap);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] = static_cast<std::uint8_t>(d[i] != 0 || d1[i] != 0);
                }
                d = refine_mask(d, config.min_area, config.closing_radius);
            } else {
                d = domain_of(decode_annotation(in["annotation"]));
            }
            out = encode_annotation(annotation_from_mask(d, Label::Inpaint));
        } else if (p.stage == "tv") {
            out = io::encode_png(tv_inpaint(img, domain(), config.tv).image, 16);
        } else if (p.stage == "exemplar") {
            const Image tv = io::decode_image(in["tv"]);
            out = io::encode_png(inpaint_exemplar(img, domain(), config.exemplar, &tv).image, 16);
        } else if (p.stage == "osmosis") {
            const Image ir = io::decode_image(in["infrared"]);
            out = io::encode_png(osmosis_restore(img, ir, decode_annotation(in["annotation"])), 16);
        }
    } catch (const Error& e) {
        fail(to_string(e.kind()), e.what());
        return;
    } catch (const std::exception& e) {
        fail("internal", e.what());
        return;
    }

    const std::string object = put_object(out);
    std::lock_guard lock(s->mutex);
    for (const auto& [node, hash] : p.upstream) {
        std::string now;
        try {
            now = node_hash(*s, node);
        } catch (const ServiceError&) {
        }
        if (now != hash) {
            auto& job = s->jobs[job_id];
            job.state = JobState::Failed;
            job.error = "input '" + node + "' changed while the stage was running; result discarded";
            job.error_kind = "dependency";
            return;
        }
    }
    const auto prev = s->artifacts.find(p.stage);
    const bool changed = prev == s->artifacts.end() || prev->second.object != object;
    if (changed) {
        invalidate(*s, p.stage);
    }
    s->artifacts[p.stage] = Record{p.key, object, p.deps, p.params};
    s->failures.erase(p.stage);
    s->jobs[job_id].state = JobState::Done;
    persist(*s);
}

JobStatus AnnotationService::job(const std::string& session, const std::string& job_id)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    const auto it = s->jobs.find(job_id);
    if (it == s->jobs.end()) {
        throw ServiceError(404, "unknown job '" + job_id + "'");
    }
    return it->second;
}

JobStatus AnnotationService::wait(const std::string& session, const std::string& job_id)
{
    while (true) {
        const JobStatus st = job(session, job_id);
        if (st.state == JobState::Done || st.state == JobState::Failed) {
            return st;
        }
        std::unique_lock lock(queue_mutex_);
        done_cv_.wait_for(lock, std::chrono::milliseconds(20));
    }
}

std::vector<std::uint8_t> AnnotationService::artifact(const std::string& session, const std::string& name)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    if (name == "image" || name == "annotation" || name == "infrared") {
        return get_object(node_hash(*s, name));
    }
    if (std::find(stage_names().begin(), stage_names().end(), name) == stage_names().end()) {
        throw ServiceError(404, "unknown artifact '" + name + "'");
    }
    if (const auto it = s->artifacts.find(name); it != s->artifacts.end()) {
        return get_object(it->second.object);
    }
    if (const auto f = s->failures.find(name); f != s->failures.end()) {
        throw ServiceError(500, "stage '" + name + "' failed (" + f->second.first + "): " + f->second.second);
    }
    throw ServiceError(409, "stage '" + name + "' has not been run", name);
}

std::set<std::string> AnnotationService::valid_artifacts(const std::string& session)
{
    auto s = find(session);
    std::lock_guard lock(s->mutex);
    std::set<std::string> out;
    for (const auto& [name, r] : s->artifacts) {
        out.insert(name);
    }
    return out;
}

} // namespace vellum
