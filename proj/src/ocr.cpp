#include "deid/ocr.hpp"

#include <json.hpp>
#include <sodium.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace deid::ocr {

namespace {

std::vector<detection> read_fixture(const std::filesystem::path& path, std::uint32_t frame) {
    std::ifstream in(path);
    if (!in) return {};
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        if (doc.is_object()) {
            const auto& frames = doc.at("frames");
            if (frame >= frames.size()) return {};
            return detections_from_json(frames[frame]);
        }
        return detections_from_json(doc);
    } catch (const std::exception& e) {
        throw engine_unavailable("bad OCR fixture '" + path.string() + "': " + e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------------------

mock_engine::mock_engine(std::vector<detection> detections)
    : fn_([d = std::move(detections)](const image8&, const frame_ref&) { return d; }) {}

mock_engine::mock_engine(script fn) : fn_(std::move(fn)) {}

std::vector<detection> mock_engine::detect(const image8& img, const frame_ref& ref) { return fn_(img, ref); }

std::filesystem::path fixture_engine::fixture_path(const std::filesystem::path& source) {
    return source.string() + ".ocr.json";
}

std::vector<detection> fixture_engine::detect(const image8&, const frame_ref& ref) {
    return read_fixture(fixture_path(ref.source), ref.frame);
}

// ---------------------------------------------------------------------------

std::string encode_base64(std::span<const std::uint8_t> data) {
    std::string out(sodium_base64_ENCODED_LEN(data.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.size() - 1);  // terminating NUL
    return out;
}

std::vector<std::uint8_t> decode_base64(std::string_view text) {
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw std::invalid_argument("malformed base64");
    }
    out.resize(len);
    return out;
}

sidecar_engine::sidecar_engine(std::vector<std::string> command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
    if (command_.empty()) throw engine_unavailable("sidecar command is empty");
    start();
}

sidecar_engine::~sidecar_engine() { stop(); }

void sidecar_engine::start() {
    // a dead child must surface as an error, not kill us on write
    static const bool ignored = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)ignored;

    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw engine_unavailable("pipe: " + std::string(std::strerror(errno)));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw engine_unavailable("pipe: " + std::string(std::strerror(errno)));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> argv;
    for (auto& a : command_) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    if (rc != 0) {
        stop();
        throw engine_unavailable("cannot start sidecar '" + command_.front() + "': " + std::strerror(rc));
    }
    pid_ = pid;

    const auto line = read_line();
    nlohmann::json hello = nlohmann::json::parse(line, nullptr, false);
    if (!hello.is_object() || hello.value("ready", false) != true) {
        const auto why = hello.is_object() ? hello.value("error", line) : line;
        stop();
        throw engine_unavailable("sidecar did not become ready: " + why);
    }
}

void sidecar_engine::stop() noexcept {
    if (to_child_ >= 0) ::close(to_child_);
    to_child_ = -1;
    if (from_child_ >= 0) ::close(from_child_);
    from_child_ = -1;
    if (pid_ > 0) {
        // closing stdin is the shutdown signal; give the child a moment
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) != 0) {
                pid_ = -1;
                return;
            }
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
}

std::string sidecar_engine::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            auto line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            broken_ = true;
            throw engine_unavailable("sidecar timed out");
        }
        pollfd p{from_child_, POLLIN, 0};
        const int n = ::poll(&p, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1000 * 60 * 60)));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) continue;
        char chunk[65536];
        const auto got = ::read(from_child_, chunk, sizeof chunk);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) {
            broken_ = true;
            throw engine_unavailable("sidecar closed its output");
        }
        buffer_.append(chunk, static_cast<std::size_t>(got));
    }
}

void sidecar_engine::write_all(std::string_view data) {
    while (!data.empty()) {
        const auto n = ::write(to_child_, data.data(), data.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            broken_ = true;
            throw engine_unavailable("sidecar input closed: " + std::string(std::strerror(errno)));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string sidecar_engine::encode_request(std::int64_t id, const image8& img) {
    nlohmann::json req{{"id", id},
                       {"width", img.cols},
                       {"height", img.rows},
                       {"channels", img.channels},
                       {"pixels", encode_base64(img.bytes)}};
    return req.dump();
}

std::vector<detection> sidecar_engine::detect(const image8& img, const frame_ref&) {
    if (broken_) {
        // one restart per failure keeps a long run going after a crash
        stop();
        broken_ = false;
        buffer_.clear();
        start();
    }
    const auto id = next_id_++;
    write_all(encode_request(id, img) + "\n");
    for (;;) {
        const auto line = read_line();
        const auto reply = nlohmann::json::parse(line, nullptr, false);
        if (!reply.is_object()) {
            broken_ = true;
            throw engine_unavailable("sidecar wrote non-JSON output");
        }
        const auto rid = reply.find("id");
        if (rid == reply.end() || !rid->is_number_integer()) continue;  // not addressed to us
        if (rid->get<std::int64_t>() < id) continue;  // late answer to an abandoned request
        if (rid->get<std::int64_t>() != id) {
            broken_ = true;
            throw engine_unavailable("sidecar answered an unknown request id");
        }
        if (const auto err = reply.find("error"); err != reply.end()) {
            throw engine_unavailable("sidecar error: " + err->dump());
        }
        try {
            return detections_from_json(reply.at("detections"));
        } catch (const std::exception& e) {
            throw engine_unavailable(std::string("bad sidecar response: ") + e.what());
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<detection> detect_text(const image8& img, engine& e, const frame_ref& ref) {
    auto found = e.detect(img, ref);
    const double max_x = img.cols == 0 ? 0.0 : static_cast<double>(img.cols - 1);
    const double max_y = img.rows == 0 ? 0.0 : static_cast<double>(img.rows - 1);
    std::vector<detection> out;
    for (auto& d : found) {
        const bool blank = std::all_of(d.text.begin(), d.text.end(),
                                       [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
        if (blank) continue;
        bool finite = true;
        for (auto& p : d.box) {
            finite = finite && std::isfinite(p.x) && std::isfinite(p.y);
            p.x = std::clamp(p.x, 0.0, max_x);
            p.y = std::clamp(p.y, 0.0, max_y);
        }
        if (finite) out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------

engine_pool::engine_pool(factory make) : make_(std::move(make)) {}

engine_pool::lease::lease(engine_pool& pool, std::unique_ptr<engine> owned, engine* shared)
    : pool_(&pool), owned_(std::move(owned)), ptr_(owned_ ? owned_.get() : shared) {}

engine_pool::lease::~lease() {
    if (owned_) {
        std::lock_guard lock(pool_->mutex_);
        pool_->idle_.push_back(std::move(owned_));
    }
}

engine_pool::lease engine_pool::acquire() {
    std::unique_lock lock(mutex_);
    if (shared_) return lease(*this, nullptr, shared_.get());
    if (!idle_.empty()) {
        auto e = std::move(idle_.back());
        idle_.pop_back();
        return lease(*this, std::move(e), nullptr);
    }
    lock.unlock();
    auto e = make_();
    if (e->thread_safe()) {
        lock.lock();
        if (!shared_) shared_ = std::move(e);
        return lease(*this, nullptr, shared_.get());
    }
    return lease(*this, std::move(e), nullptr);
}

engine_pool::factory make_factory(const config::ocr_config& cfg) {
    switch (cfg.engine) {
        case config::ocr_engine_kind::mock:
            return [d = cfg.mock_detections] { return std::make_unique<mock_engine>(d); };
        case config::ocr_engine_kind::fixture: return [] { return std::make_unique<fixture_engine>(); };
        case config::ocr_engine_kind::sidecar:
            return [cmd = cfg.command, t = cfg.timeout_seconds] {
                return std::make_unique<sidecar_engine>(cmd, std::chrono::seconds(t));
            };
    }
    throw std::invalid_argument("unknown OCR engine");
}

}  // namespace deid::ocr
