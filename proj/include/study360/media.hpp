#pragma once

// HTTP media origin pieces: single-range parsing, the media catalog, the
// per-session manifest and response planning for GET /media/{id}. Socket I/O
// lives in net.hpp; everything here is pure or file-backed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "study360/study_config.hpp"

namespace study360 {

struct ByteRange {
    std::int64_t start = 0;
    std::int64_t end = 0;  // inclusive
    std::int64_t length() const noexcept { return end - start + 1; }
    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

enum class RangeOutcome { ignore, unsatisfiable };

using RangeResult = std::variant<ByteRange, RangeOutcome>;

/// Single-range subset of RFC 7233. Multiple ranges, other units and
/// malformed headers are ignored (serve the full body).
RangeResult parse_range(std::string_view header, std::int64_t total_length);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file_hex(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

struct MediaEntry {
    std::filesystem::path path;
    std::int64_t length = 0;
    std::string sha256;
};

/// Immutable after construction. Media ids are paths relative to the media
/// directory using '/' separators.
class MediaCatalog {
public:
    MediaCatalog() = default;

    /// Indexes every regular file under `dir` (recursively) and hashes it.
    static MediaCatalog load(const std::filesystem::path& dir);

    const MediaEntry* find(std::string_view id) const;
    const std::map<std::string, MediaEntry, std::less<>>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, MediaEntry, std::less<>> entries_;
};

class MissingMedia : public std::runtime_error {
public:
    explicit MissingMedia(std::string id) : std::runtime_error("media '" + id + "' is not in the catalog"), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

/// Percent-encodes everything outside RFC 3986 unreserved characters, keeping '/'.
std::string url_encode_path(std::string_view id);

/// Decodes %XX escapes; returns nullopt on a malformed escape.
std::optional<std::string> url_decode(std::string_view s);

/// Manifest JSON for a session. Throws MissingMedia for unknown media ids.
std::string build_manifest(const StudyConfig& cfg, const MediaCatalog& catalog, std::string_view base_url);

/// What to send for GET /media/{id}. The body is `body` bytes of `path`
/// starting at `body_offset`; empty path means no body.
struct MediaResponse {
    int status = 200;
    std::vector<std::pair<std::string, std::string>> headers;
    std::filesystem::path path;
    std::int64_t body_offset = 0;
    std::int64_t body_length = 0;

    std::optional<std::string> header(std::string_view name) const;
};

MediaResponse plan_media_response(const MediaCatalog& catalog, std::string_view id,
                                  std::optional<std::string_view> range_header);

std::string content_type_for(std::string_view id);

}  // namespace study360
