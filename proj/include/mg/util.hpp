#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mg::util {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(const Bytes& b);

std::string hex_encode(const Bytes& b);
std::string hex_encode(const std::uint8_t* data, std::size_t n);
std::optional<Bytes> hex_decode(std::string_view hex);

std::string base64_encode(const Bytes& b);
std::string base64_encode(std::string_view s);
std::optional<Bytes> base64_decode(std::string_view b64);

// Percent-encoding used by every line-oriented external format in the
// system (catalog log, audit log, MGP headers, MGRS rows). Reserved set:
// '%', '=', CR, LF, plus any caller-supplied extras; all non-printable
// bytes are always escaped.
std::string percent_encode(std::string_view s, std::string_view extra = "");
std::optional<std::string> percent_decode(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string trim(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains_bytes(const Bytes& haystack, std::string_view needle);

// UTC timestamp helpers. All services keep time as seconds since epoch so
// the simnet virtual clock can stand in for wall time.
std::string iso8601_utc(std::int64_t epoch_seconds);
int utc_year(std::int64_t epoch_seconds);

// Big-endian integer packing for the MGD1 and MGP byte layouts.
void put_u16be(Bytes& out, std::uint16_t v);
void put_u32be(Bytes& out, std::uint32_t v);
void put_u64be(Bytes& out, std::uint64_t v);
std::uint16_t get_u16be(const std::uint8_t* p);
std::uint32_t get_u32be(const std::uint8_t* p);
std::uint64_t get_u64be(const std::uint8_t* p);

}  // namespace mg::util
