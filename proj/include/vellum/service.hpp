#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "vellum/annotation.hpp"
#include "vellum/image.hpp"

namespace vellum {

/// Error carrying an HTTP status: 400 bad input, 404 unknown session, job or
/// artifact, 409 missing dependency (`missing()` names the stage), 500 stage
/// failure.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what, std::string missing = {})
        : std::runtime_error(what), status_(status), missing_(std::move(missing)) {}

    int status() const noexcept { return status_; }
    const std::string& missing() const noexcept { return missing_; }

private:
    int status_;
    std::string missing_;
};

/// One brush stroke: every pixel within `radius` of the polyline gets `label`.
struct Stroke {
    Label label = Label::Inpaint;
    std::vector<Pixel> points;
    double radius = 1.0;
};

/// Paints strokes in order (later strokes overwrite earlier ones).
void paint_strokes(AnnotationMask& mask, std::span<const Stroke> strokes);
/// Parses {"strokes": [{"label": name, "points": [[x,y],...], "radius": r}]}.
std::vector<Stroke> strokes_from_json(const nlohmann::json& j);

enum class JobState { Queued, Running, Done, Failed };
const char* to_string(JobState s);

struct JobStatus {
    std::string id;
    std::string stage;
    JobState state = JobState::Queued;
    bool cached = false;
    std::string error;
    std::string error_kind;
};

struct ServiceOptions {
    std::filesystem::path store_dir;
    int workers = 2;
};

/// Session store and stage runner behind the HTTP API.
///
/// Stage graph (inputs in lower case):
///   D1       <- image, seeds                     params: chan_vese
///   labels   <- image                            params: kmeans
///   D        <- D1, labels   (source=segmentation, default with seeds)
///            <- annotation   (source=annotation, default without seeds)
///                                                params: refine
///   tv       <- image, D                         params: tv
///   exemplar <- image, D, tv                     params: exemplar
///   osmosis  <- image, infrared, annotation
/// Each artifact records the nodes it was computed from; mutating a node
/// drops every artifact that transitively depends on it and nothing else.
/// Results are cached by a hash of stage, parameters and upstream content.
class AnnotationService {
public:
    explicit AnnotationService(ServiceOptions options);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    static const std::vector<std::string>& stage_names();

    std::string create_session(std::span<const std::uint8_t> image_png);
    nlohmann::json session_state(const std::string& session);
    nlohmann::json set_seeds(const std::string& session, const std::vector<Pixel>& seeds);
    nlohmann::json add_strokes(const std::string& session, const std::vector<Stroke>& strokes);
    nlohmann::json set_infrared(const std::string& session, std::span<const std::uint8_t> png);

    /// Starts (or answers from cache) a stage run; returns the job id.
    std::string run_stage(const std::string& session, const std::string& stage, const nlohmann::json& params);
    JobStatus job(const std::string& session, const std::string& job_id);
    /// Blocks until the job has finished.
    JobStatus wait(const std::string& session, const std::string& job_id);

    /// PNG bytes of "image", "annotation", "infrared" or a stage artifact.
    std::vector<std::uint8_t> artifact(const std::string& session, const std::string& name);
    /// Names of the artifacts currently valid.
    std::set<std::string> valid_artifacts(const std::string& session);

private:
    struct Record {
        std::string key;
        std::string object;
        std::set<std::string> deps; // direct upstream nodes
        nlohmann::json params;
    };
    struct Session {
        std::string id;
        std::mutex mutex;      // guards the fields below
        std::mutex run_mutex;  // serialises stage execution
        std::string image;     // object ids
        std::string annotation;
        std::optional<std::string> infrared;
        std::vector<Pixel> seeds;
        int width = 0;
        int height = 0;
        std::map<std::string, Record> artifacts;
        std::map<std::string, std::pair<std::string, std::string>> failures; // stage -> (kind, message)
        std::map<std::string, JobStatus> jobs;
        std::uint64_t next_job = 1;
    };
    struct Plan {
        std::string stage;
        nlohmann::json params;
        std::set<std::string> deps;
        std::map<std::string, std::string> upstream; // node -> content hash
        std::string key;
    };

    std::shared_ptr<Session> find(const std::string& id);
    std::shared_ptr<Session> load(const std::string& id);
    void persist(Session& s);
    std::string put_object(std::span<const std::uint8_t> bytes);
    std::vector<std::uint8_t> get_object(const std::string& id) const;
    Plan plan(Session& s, const std::string& stage, const nlohmann::json& params);
    std::string node_hash(Session& s, const std::string& node);
    void invalidate(Session& s, const std::string& node);
    void execute(std::shared_ptr<Session> s, std::string job_id, Plan plan);
    nlohmann::json state_json(Session& s);
    void enqueue(std::function<void()> task);

    ServiceOptions options_;
    std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable done_cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

} // namespace vellum
