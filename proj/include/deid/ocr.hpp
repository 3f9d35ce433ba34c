/**
 * @file ocr.hpp
 * @brief Pluggable text detection for burned-in annotations.
 *
 * Engines receive an 8-bit rendering of one frame and return detections in
 * pixel coordinates. Three engines ship: a scripted mock, a fixture reader
 * for `<file>.ocr.json` files, and a child process speaking JSON lines.
 */

#pragma once

#include "deid/config.hpp"
#include "deid/detection.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deid::ocr {

/// One rendered frame, row-major, channels interleaved.
struct image8 {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t channels = 1;
    std::vector<std::uint8_t> bytes;
    bool degenerate = false;  ///< source frame had a single value

    [[nodiscard]] std::uint8_t at(std::uint32_t row, std::uint32_t col, std::uint32_t channel = 0) const noexcept {
        return bytes[(static_cast<std::size_t>(row) * cols + col) * channels + channel];
    }
};

/// Where a frame came from; fixture engines look up their data by path.
struct frame_ref {
    std::filesystem::path source;
    std::uint32_t frame = 0;
};

class engine_unavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class engine {
public:
    virtual ~engine() = default;
    virtual std::vector<detection> detect(const image8& img, const frame_ref& ref) = 0;
    /// False when one instance must not serve two threads at once.
    [[nodiscard]] virtual bool thread_safe() const noexcept = 0;
    [[nodiscard]] virtual std::string_view name() const noexcept = 0;
};

/// Returns the scripted detections, or the result of a callback.
class mock_engine final : public engine {
public:
    using script = std::function<std::vector<detection>(const image8&, const frame_ref&)>;

    explicit mock_engine(std::vector<detection> detections = {});
    explicit mock_engine(script fn);

    std::vector<detection> detect(const image8& img, const frame_ref& ref) override;
    [[nodiscard]] bool thread_safe() const noexcept override { return true; }
    [[nodiscard]] std::string_view name() const noexcept override { return "mock"; }

private:
    script fn_;
};

/// Reads `<source>.ocr.json`: a detection list applied to every frame, or
/// {"frames": [[...], [...]]} with one list per frame. No file, no text.
class fixture_engine final : public engine {
public:
    std::vector<detection> detect(const image8& img, const frame_ref& ref) override;
    [[nodiscard]] bool thread_safe() const noexcept override { return true; }
    [[nodiscard]] std::string_view name() const noexcept override { return "fixture"; }

    [[nodiscard]] static std::filesystem::path fixture_path(const std::filesystem::path& source);
};

/// Child process speaking the JSON-lines protocol over stdin/stdout.
///
///   child -> {"ready": true}
///   parent -> {"id": n, "width": w, "height": h, "channels": c, "pixels": base64}
///   child -> {"id": n, "detections": [...]}   or   {"id": n, "error": "..."}
///
/// Serial: one request in flight, so one instance per worker.
class sidecar_engine final : public engine {
public:
    sidecar_engine(std::vector<std::string> command, std::chrono::milliseconds timeout);
    ~sidecar_engine() override;
    sidecar_engine(const sidecar_engine&) = delete;
    sidecar_engine& operator=(const sidecar_engine&) = delete;

    std::vector<detection> detect(const image8& img, const frame_ref& ref) override;
    [[nodiscard]] bool thread_safe() const noexcept override { return false; }
    [[nodiscard]] std::string_view name() const noexcept override { return "sidecar"; }

    /// The request line for one image, without the newline.
    [[nodiscard]] static std::string encode_request(std::int64_t id, const image8& img);

private:
    void start();
    void stop() noexcept;
    std::string read_line();
    void write_all(std::string_view data);

    std::vector<std::string> command_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::int64_t next_id_ = 1;
    bool broken_ = false;
};

[[nodiscard]] std::string encode_base64(std::span<const std::uint8_t> data);
/// Throws std::invalid_argument on malformed input.
[[nodiscard]] std::vector<std::uint8_t> decode_base64(std::string_view text);

/// Run the engine, clamp every box into the image and drop empty texts.
[[nodiscard]] std::vector<detection> detect_text(const image8& img, engine& e, const frame_ref& ref);

/// Hands out engines to workers. Thread-safe engines are shared; others
/// are created on demand, one per concurrent borrower.
class engine_pool {
public:
    using factory = std::function<std::unique_ptr<engine>()>;
    explicit engine_pool(factory make);

    class lease {
    public:
        lease(engine_pool& pool, std::unique_ptr<engine> owned, engine* shared);
        ~lease();
        lease(lease&&) noexcept = default;
        lease(const lease&) = delete;
        engine& operator*() const noexcept { return *ptr_; }
        engine* operator->() const noexcept { return ptr_; }

    private:
        engine_pool* pool_;
        std::unique_ptr<engine> owned_;
        engine* ptr_;
    };

    [[nodiscard]] lease acquire();

private:
    friend class lease;
    factory make_;
    std::mutex mutex_;
    std::unique_ptr<engine> shared_;
    std::vector<std::unique_ptr<engine>> idle_;
};

/// Engine factory for the configured kind.
[[nodiscard]] engine_pool::factory make_factory(const config::ocr_config& cfg);

}  // namespace deid::ocr
