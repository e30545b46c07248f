#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mg/error.hpp"
#include "mg/util.hpp"

// Simplified DICOM-like mammogram format ("MGD1"): a flat, tag-ordered
// list of explicitly typed elements. Parsing, canonical serialization,
// validation, structured translation, and anonymization are all pure
// functions over value types.
namespace mg::dicomlite {

using util::Bytes;

struct TagKey {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  auto operator<=>(const TagKey&) const = default;

  // Rendered as "(GGGG,EEEE)", uppercase hex.
  std::string to_string() const;
};

enum class Vr : std::uint8_t { PN, LO, DA, UI, CS, US, OB };

const char* vr_code(Vr vr);                       // two-letter code
std::optional<Vr> vr_from_code(std::string_view); // nullopt for unknown codes

// Text for PN/LO/DA/UI/CS, 16-bit unsigned for US, raw bytes for OB.
using ElementValue = std::variant<std::string, std::uint16_t, Bytes>;

struct DataElement {
  TagKey tag;
  Vr vr = Vr::LO;
  ElementValue value;

  bool operator==(const DataElement&) const = default;

  const std::string& text() const { return std::get<std::string>(value); }
  std::uint16_t number() const { return std::get<std::uint16_t>(value); }
  const Bytes& blob() const { return std::get<Bytes>(value); }
};

DataElement text_element(TagKey tag, Vr vr, std::string value);
DataElement number_element(TagKey tag, std::uint16_t value);
DataElement blob_element(TagKey tag, Bytes value);

class DataSet {
 public:
  DataSet() = default;

  // Keeps elements strictly tag-ordered; replaces an existing element
  // with the same tag.
  void set(DataElement element);
  void remove(TagKey tag);
  const DataElement* find(TagKey tag) const;

  const std::vector<DataElement>& elements() const { return elements_; }
  bool operator==(const DataSet&) const = default;

 private:
  std::vector<DataElement> elements_;
};

// The 13 mandatory tags of a complete mammogram record.
namespace tags {
inline constexpr TagKey kSopInstanceUid{0x0008, 0x0018};   // UI
inline constexpr TagKey kStudyDate{0x0008, 0x0020};        // DA
inline constexpr TagKey kModality{0x0008, 0x0060};         // CS
inline constexpr TagKey kPatientName{0x0010, 0x0010};      // PN
inline constexpr TagKey kPatientId{0x0010, 0x0020};        // LO
inline constexpr TagKey kBirthDate{0x0010, 0x0030};        // DA
inline constexpr TagKey kViewPosition{0x0018, 0x5101};     // CS
inline constexpr TagKey kStudyInstanceUid{0x0020, 0x000D}; // UI
inline constexpr TagKey kSeriesInstanceUid{0x0020, 0x000E};// UI
inline constexpr TagKey kLaterality{0x0020, 0x0060};       // CS
inline constexpr TagKey kRows{0x0028, 0x0010};             // US
inline constexpr TagKey kColumns{0x0028, 0x0011};          // US
inline constexpr TagKey kPixelData{0x7FE0, 0x0010};        // OB
// Private tag holding the sealed original (birth date, patient id) after
// anonymization.
inline constexpr TagKey kSealedIdentity{0x0011, 0x0010};   // LO
}  // namespace tags

struct MandatoryTagSpec {
  TagKey tag;
  Vr vr;
  const char* leaf;  // StructuredRecord leaf path
};

// Tag order equals leaf-table order here; both are fixed.
const std::vector<MandatoryTagSpec>& mandatory_tags();

// --- Codec -----------------------------------------------------------

// File format "MGD1": magic "MGD1", u32be element count, then per element
// u16be group, u16be element, 2 ASCII VR bytes, u32be value length, value
// bytes (text UTF-8, US as u16be, OB raw).
Bytes serialize(const DataSet& ds);
DataSet parse(const Bytes& bytes);

// --- Structured translation -------------------------------------------

// Named tree of text/integer leaves mirroring the mandatory-tag subset.
// External form: "path.to.leaf=value" lines, sorted lexicographically.
struct StructuredRecord {
  std::map<std::string, std::string> leaves;

  bool operator==(const StructuredRecord&) const = default;

  std::string render() const;
  static StructuredRecord from_text(std::string_view text);
};

StructuredRecord to_structured(const DataSet& ds);
DataSet from_structured(const StructuredRecord& rec);

// Encoding of the pixel payload inside StructuredRecord.image.pixel_ref:
// "b64:<base64 bytes>" carries the payload inline; "ref:<text>" marks a
// catalogue reference and round-trips to a zero-length OB element.
std::string pixel_ref_inline(const Bytes& pixels);

// --- Validation --------------------------------------------------------

enum class Severity { kError, kWarning };

struct ValidationIssue {
  Severity severity;
  TagKey tag;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const;           // no ERROR-level issues
  std::size_t error_count() const;
  std::size_t warning_count() const;
};

ValidationReport validate(const DataSet& ds);

// Value well-formedness for one VR (DA: exactly 8 digits; UI: dotted
// decimal; CS: uppercase/digits/space/underscore, <= 16 chars).
bool value_well_formed(Vr vr, const ElementValue& value);

// --- Anonymization ------------------------------------------------------

struct AnonymizationKey {
  Bytes cipher_key;     // 32 bytes
  Bytes pseudonym_salt; // 16 bytes
};

AnonymizationKey make_key(const Bytes& cipher_key, const Bytes& pseudonym_salt);

// Deterministic keyed pseudonym: first 16 hex chars of
// SHA-256(salt || patient_id), prefixed "PSN:".
std::string pseudonym_for(const Bytes& salt, std::string_view patient_id);

DataSet anonymize(const DataSet& ds, const AnonymizationKey& key);
DataSet deanonymize(const DataSet& ds, const AnonymizationKey& key);

bool is_anonymized(const DataSet& ds);

}  // namespace mg::dicomlite
