#include "study360/media.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>

namespace study360 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::optional<std::int64_t> parse_digits(std::string_view s) {
    if (s.empty()) return std::nullopt;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    }
    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("sha256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw std::runtime_error("sha256 final failed");
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out;
        out.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(kHex[md[i] >> 4]);
            out.push_back(kHex[md[i] & 0xF]);
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

// Study files reference media by catalog id; a leading "./" or "/" is tolerated.
std::string media_id_of(std::string_view url) {
    if (url.starts_with("./")) url.remove_prefix(2);
    while (url.starts_with("/")) url.remove_prefix(1);
    return std::string(url);
}

}  // namespace

RangeResult parse_range(std::string_view header, std::int64_t total_length) {
    header = trim(header);
    const auto eq = header.find('=');
    if (eq == std::string_view::npos) return RangeOutcome::ignore;
    if (!iequals(trim(header.substr(0, eq)), "bytes")) return RangeOutcome::ignore;
    const std::string_view spec = trim(header.substr(eq + 1));
    if (spec.find(',') != std::string_view::npos) return RangeOutcome::ignore;
    const auto dash = spec.find('-');
    if (dash == std::string_view::npos) return RangeOutcome::ignore;
    const std::string_view first = trim(spec.substr(0, dash));
    const std::string_view last = trim(spec.substr(dash + 1));

    if (first.empty()) {
        const auto suffix = parse_digits(last);
        if (!suffix) return RangeOutcome::ignore;
        if (*suffix == 0) return RangeOutcome::unsatisfiable;
        return ByteRange{std::max<std::int64_t>(0, total_length - *suffix), total_length - 1};
    }
    const auto start = parse_digits(first);
    if (!start) return RangeOutcome::ignore;
    std::int64_t end = total_length - 1;
    if (!last.empty()) {
        const auto e = parse_digits(last);
        if (!e || *e < *start) return RangeOutcome::ignore;
        end = std::min(*e, total_length - 1);
    }
    if (*start >= total_length) return RangeOutcome::unsatisfiable;
    return ByteRange{*start, end};
}

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

MediaCatalog MediaCatalog::load(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("media directory '" + dir.string() + "' does not exist");
    MediaCatalog cat;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string id = fs::relative(entry.path(), dir).generic_string();
        cat.entries_[id] = MediaEntry{entry.path(), static_cast<std::int64_t>(entry.file_size()), sha256_file_hex(entry.path())};
    }
    return cat;
}

const MediaEntry* MediaCatalog::find(std::string_view id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string url_encode_path(std::string_view id) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : id) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        }
    }
    return out;
}

std::optional<std::string> url_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out.push_back(s[i]);
            continue;
        }
        if (i + 2 >= s.size()) return std::nullopt;
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
        if (ec != std::errc{} || ptr != s.data() + i + 3) return std::nullopt;
        out.push_back(static_cast<char>(v));
        i += 2;
    }
    return out;
}

std::string build_manifest(const StudyConfig& cfg, const MediaCatalog& catalog, std::string_view base_url) {
    std::string base(base_url);
    while (!base.empty() && base.back() == '/') base.pop_back();
    auto resolve = [&](std::string_view url) -> std::pair<std::string, const MediaEntry*> {
        const std::string id = media_id_of(url);
        const MediaEntry* e = catalog.find(id);
        if (e == nullptr) throw MissingMedia(id);
        return {base + "/media/" + url_encode_path(id), e};
    };

    const auto [video_url, video] = resolve(cfg.media.url);
    json manifest{{"video",
                   {{"url", video_url},
                    {"width_px", cfg.media.width_px},
                    {"height_px", cfg.media.height_px},
                    {"duration_ms", cfg.media.duration_ms},
                    {"projection", cfg.media.projection},
                    {"sha256", video->sha256}}},
                  {"audio", json::array()}};
    for (const AudioTrack& a : cfg.audio_tracks) {
        const auto [url, entry] = resolve(a.url);
        json t{{"id", a.id}, {"url", url}, {"start_ms", a.start_ms}, {"gain", a.gain}, {"sha256", entry->sha256}};
        if (a.mode.kind == AudioMode::Kind::spatial) {
            t["mode"] = "spatial";
            t["anchor"] = direction_to_json(a.mode.anchor);
        } else {
            t["mode"] = "mono";
        }
        manifest["audio"].push_back(std::move(t));
    }
    return manifest.dump(2);
}

std::optional<std::string> MediaResponse::header(std::string_view name) const {
    for (const auto& [k, v] : headers) {
        if (iequals(k, name)) return v;
    }
    return std::nullopt;
}

std::string content_type_for(std::string_view id) {
    const auto dot = id.rfind('.');
    std::string ext = dot == std::string_view::npos ? "" : std::string(id.substr(dot + 1));
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == "mp4" || ext == "m4v") return "video/mp4";
    if (ext == "webm") return "video/webm";
    if (ext == "mp3") return "audio/mpeg";
    if (ext == "wav") return "audio/wav";
    if (ext == "ogg" || ext == "oga") return "audio/ogg";
    if (ext == "m4a") return "audio/mp4";
    if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
    if (ext == "png") return "image/png";
    if (ext == "json") return "application/json";
    return "application/octet-stream";
}

MediaResponse plan_media_response(const MediaCatalog& catalog, std::string_view id,
                                  std::optional<std::string_view> range_header) {
    MediaResponse r;
    const MediaEntry* e = catalog.find(id);
    if (e == nullptr) {
        r.status = 404;
        r.headers = {{"Content-Type", "text/plain"}};
        return r;
    }
    const std::string total = std::to_string(e->length);
    r.headers = {{"Accept-Ranges", "bytes"}, {"ETag", "\"" + e->sha256 + "\""}, {"Content-Type", content_type_for(id)}};

    RangeResult range = RangeOutcome::ignore;
    if (range_header && e->length > 0) range = parse_range(*range_header, e->length);

    if (const auto* br = std::get_if<ByteRange>(&range)) {
        r.status = 206;
        r.headers.emplace_back("Content-Range", "bytes " + std::to_string(br->start) + "-" + std::to_string(br->end) + "/" + total);
        r.path = e->path;
        r.body_offset = br->start;
        r.body_length = br->length();
    } else if (std::get<RangeOutcome>(range) == RangeOutcome::unsatisfiable) {
        r.status = 416;
        r.headers.emplace_back("Content-Range", "bytes */" + total);
    } else {
        r.status = 200;
        r.path = e->path;
        r.body_offset = 0;
        r.body_length = e->length;
    }
    return r;
}

}  // namespace study360
