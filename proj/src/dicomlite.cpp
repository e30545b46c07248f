#include "mg/dicomlite.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "mg/crypto.hpp"

namespace mg::dicomlite {

namespace {
constexpr char kMagic[4] = {'M', 'G', 'D', '1'};
constexpr char kEncPrefix[] = "ENC:A256GCM:";
constexpr char kPsnPrefix[] = "PSN:";
}  // namespace

std::string TagKey::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "(%04X,%04X)", group, element);
  return buf;
}

const char* vr_code(Vr vr) {
  switch (vr) {
    case Vr::PN: return "PN";
    case Vr::LO: return "LO";
    case Vr::DA: return "DA";
    case Vr::UI: return "UI";
    case Vr::CS: return "CS";
    case Vr::US: return "US";
    case Vr::OB: return "OB";
  }
  return "??";
}

std::optional<Vr> vr_from_code(std::string_view code) {
  if (code == "PN") return Vr::PN;
  if (code == "LO") return Vr::LO;
  if (code == "DA") return Vr::DA;
  if (code == "UI") return Vr::UI;
  if (code == "CS") return Vr::CS;
  if (code == "US") return Vr::US;
  if (code == "OB") return Vr::OB;
  return std::nullopt;
}

DataElement text_element(TagKey tag, Vr vr, std::string value) {
  return DataElement{tag, vr, std::move(value)};
}

DataElement number_element(TagKey tag, std::uint16_t value) {
  return DataElement{tag, Vr::US, value};
}

DataElement blob_element(TagKey tag, Bytes value) {
  return DataElement{tag, Vr::OB, std::move(value)};
}

void DataSet::set(DataElement element) {
  auto it = std::lower_bound(
      elements_.begin(), elements_.end(), element.tag,
      [](const DataElement& e, TagKey tag) { return e.tag < tag; });
  if (it != elements_.end() && it->tag == element.tag) {
    *it = std::move(element);
  } else {
    elements_.insert(it, std::move(element));
  }
}

void DataSet::remove(TagKey tag) {
  auto it = std::find_if(elements_.begin(), elements_.end(),
                         [&](const DataElement& e) { return e.tag == tag; });
  if (it != elements_.end()) elements_.erase(it);
}

const DataElement* DataSet::find(TagKey tag) const {
  auto it = std::lower_bound(
      elements_.begin(), elements_.end(), tag,
      [](const DataElement& e, TagKey t) { return e.tag < t; });
  if (it != elements_.end() && it->tag == tag) return &*it;
  return nullptr;
}

const std::vector<MandatoryTagSpec>& mandatory_tags() {
  static const std::vector<MandatoryTagSpec> specs = {
      {tags::kSopInstanceUid, Vr::UI, "study.site"},
      {tags::kStudyDate, Vr::DA, "study.date"},
      {tags::kModality, Vr::CS, "series.modality"},
      {tags::kPatientName, Vr::PN, "patient.name"},
      {tags::kPatientId, Vr::LO, "patient.id"},
      {tags::kBirthDate, Vr::DA, "patient.birth_date"},
      {tags::kViewPosition, Vr::CS, "series.view"},
      {tags::kStudyInstanceUid, Vr::UI, "study.uid"},
      {tags::kSeriesInstanceUid, Vr::UI, "series.uid"},
      {tags::kLaterality, Vr::CS, "series.laterality"},
      {tags::kRows, Vr::US, "image.rows"},
      {tags::kColumns, Vr::US, "image.cols"},
      {tags::kPixelData, Vr::OB, "image.pixel_ref"},
  };
  return specs;
}

// --- Codec -----------------------------------------------------------

Bytes serialize(const DataSet& ds) {
  const auto& elements = ds.elements();
  for (std::size_t i = 1; i < elements.size(); ++i) {
    if (!(elements[i - 1].tag < elements[i].tag)) {
      fail("InvariantViolation",
           "elements not strictly tag-ordered at " + elements[i].tag.to_string());
    }
  }
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  util::put_u32be(out, static_cast<std::uint32_t>(elements.size()));
  for (const auto& e : elements) {
    util::put_u16be(out, e.tag.group);
    util::put_u16be(out, e.tag.element);
    const char* code = vr_code(e.vr);
    out.push_back(static_cast<std::uint8_t>(code[0]));
    out.push_back(static_cast<std::uint8_t>(code[1]));
    switch (e.vr) {
      case Vr::US: {
        util::put_u32be(out, 2);
        util::put_u16be(out, e.number());
        break;
      }
      case Vr::OB: {
        const Bytes& b = e.blob();
        util::put_u32be(out, static_cast<std::uint32_t>(b.size()));
        out.insert(out.end(), b.begin(), b.end());
        break;
      }
      default: {
        const std::string& t = e.text();
        util::put_u32be(out, static_cast<std::uint32_t>(t.size()));
        out.insert(out.end(), t.begin(), t.end());
        break;
      }
    }
  }
  return out;
}

DataSet parse(const Bytes& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail("MalformedHeader", "missing MGD1 magic");
  }
  std::uint32_t count = util::get_u32be(bytes.data() + 4);
  std::size_t pos = 8;
  DataSet ds;
  TagKey prev{};
  bool have_prev = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (pos + 10 > bytes.size()) fail("TruncatedElement", "element header past end");
    TagKey tag{util::get_u16be(bytes.data() + pos),
               util::get_u16be(bytes.data() + pos + 2)};
    std::string code(reinterpret_cast<const char*>(bytes.data() + pos + 4), 2);
    std::uint32_t len = util::get_u32be(bytes.data() + pos + 6);
    pos += 10;
    auto vr = vr_from_code(code);
    if (!vr) fail("BadVR", "unknown VR '" + code + "' at " + tag.to_string());
    if (pos + len > bytes.size()) {
      fail("TruncatedElement", "value of " + tag.to_string() + " past end");
    }
    if (have_prev && !(prev < tag)) {
      fail("TagOrderViolation",
           tag.to_string() + " does not follow " + prev.to_string());
    }
    prev = tag;
    have_prev = true;

    DataElement element;
    element.tag = tag;
    element.vr = *vr;
    switch (*vr) {
      case Vr::US:
        if (len != 2) fail("TruncatedElement", "US value must be 2 bytes");
        element.value = util::get_u16be(bytes.data() + pos);
        break;
      case Vr::OB:
        element.value = Bytes(bytes.begin() + pos, bytes.begin() + pos + len);
        break;
      default:
        element.value = std::string(reinterpret_cast<const char*>(bytes.data() + pos), len);
        break;
    }
    pos += len;
    ds.set(std::move(element));
  }
  if (pos != bytes.size()) fail("TruncatedElement", "trailing bytes after last element");
  return ds;
}

// --- Structured translation ---------------------------------------------

std::string pixel_ref_inline(const Bytes& pixels) {
  return "b64:" + util::base64_encode(pixels);
}

std::string StructuredRecord::render() const {
  std::string out;
  for (const auto& [path, value] : leaves) {  // std::map is already sorted
    out += path;
    out += '=';
    out += util::percent_encode(value);
    out += '\n';
  }
  return out;
}

StructuredRecord StructuredRecord::from_text(std::string_view text) {
  StructuredRecord rec;
  for (const auto& line : util::split(text, '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("BadLeafValue", "line without '=': " + line);
    auto value = util::percent_decode(line.substr(eq + 1));
    if (!value) fail("BadLeafValue", "bad percent-encoding: " + line);
    rec.leaves[line.substr(0, eq)] = *value;
  }
  return rec;
}

StructuredRecord to_structured(const DataSet& ds) {
  auto report = validate(ds);
  if (!report.ok()) {
    fail("IncompleteDataSet",
         "dataset has " + std::to_string(report.error_count()) + " validation error(s)");
  }
  StructuredRecord rec;
  for (const auto& spec : mandatory_tags()) {
    const DataElement* e = ds.find(spec.tag);
    switch (spec.vr) {
      case Vr::US:
        rec.leaves[spec.leaf] = std::to_string(e->number());
        break;
      case Vr::OB:
        rec.leaves[spec.leaf] = pixel_ref_inline(e->blob());
        break;
      default:
        rec.leaves[spec.leaf] = e->text();
        break;
    }
  }
  return rec;
}

DataSet from_structured(const StructuredRecord& rec) {
  DataSet ds;
  for (const auto& spec : mandatory_tags()) {
    auto it = rec.leaves.find(spec.leaf);
    if (it == rec.leaves.end()) fail("MissingLeaf", std::string("missing ") + spec.leaf);
    const std::string& raw = it->second;
    DataElement element;
    element.tag = spec.tag;
    element.vr = spec.vr;
    switch (spec.vr) {
      case Vr::US: {
        char* end = nullptr;
        unsigned long v = std::strtoul(raw.c_str(), &end, 10);
        if (end == raw.c_str() || *end != '\0' || v > 0xFFFF) {
          fail("BadLeafValue", std::string(spec.leaf) + " is not a 16-bit integer");
        }
        element.value = static_cast<std::uint16_t>(v);
        break;
      }
      case Vr::OB: {
        if (util::starts_with(raw, "b64:")) {
          auto bytes = util::base64_decode(raw.substr(4));
          if (!bytes) fail("BadLeafValue", std::string(spec.leaf) + " has bad base64");
          element.value = std::move(*bytes);
        } else if (util::starts_with(raw, "ref:")) {
          element.value = Bytes{};  // payload lives behind a catalogue reference
        } else {
          fail("BadLeafValue", std::string(spec.leaf) + " must be b64: or ref:");
        }
        break;
      }
      default: {
        if (!value_well_formed(spec.vr, raw)) {
          fail("BadLeafValue", std::string(spec.leaf) + " malformed for VR " + vr_code(spec.vr));
        }
        element.value = raw;
        break;
      }
    }
    ds.set(std::move(element));
  }
  return ds;
}

// --- Validation -----------------------------------------------------------

bool ValidationReport::ok() const { return error_count() == 0; }

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [](const ValidationIssue& i) {
        return i.severity == Severity::kError;
      }));
}

std::size_t ValidationReport::warning_count() const {
  return issues.size() - error_count();
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c);
  });
}

bool valid_da(std::string_view s) {
  if (s.size() != 8 || !all_digits(s)) return false;
  int month = (s[4] - '0') * 10 + (s[5] - '0');
  int day = (s[6] - '0') * 10 + (s[7] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

bool valid_ui(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  for (const auto& part : util::split(s, '.')) {
    if (!all_digits(part)) return false;
  }
  return true;
}

bool valid_cs(std::string_view s) {
  if (s.size() > 16) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isupper(c) || std::isdigit(c) || c == ' ' || c == '_';
  });
}

bool printable_text(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c >= 0x20 || c == '\t';
  });
}

}  // namespace

bool value_well_formed(Vr vr, const ElementValue& value) {
  switch (vr) {
    case Vr::US: return std::holds_alternative<std::uint16_t>(value);
    case Vr::OB: return std::holds_alternative<Bytes>(value);
    default: break;
  }
  if (!std::holds_alternative<std::string>(value)) return false;
  const std::string& s = std::get<std::string>(value);
  switch (vr) {
    case Vr::DA: return valid_da(s);
    case Vr::UI: return valid_ui(s);
    case Vr::CS: return valid_cs(s);
    case Vr::PN:
    case Vr::LO: return printable_text(s);
    default: return false;
  }
}

ValidationReport validate(const DataSet& ds) {
  ValidationReport report;
  for (const auto& spec : mandatory_tags()) {
    const DataElement* e = ds.find(spec.tag);
    if (!e) {
      report.issues.push_back({Severity::kError, spec.tag,
                               "missing mandatory tag " + spec.tag.to_string()});
      continue;
    }
    if (e->vr != spec.vr) {
      report.issues.push_back(
          {Severity::kError, spec.tag,
           std::string("expected VR ") + vr_code(spec.vr) + ", found " + vr_code(e->vr)});
      continue;
    }
    if (!value_well_formed(e->vr, e->value)) {
      report.issues.push_back({Severity::kError, spec.tag,
                               std::string("malformed ") + vr_code(e->vr) + " value"});
    }
  }
  for (const auto& e : ds.elements()) {
    bool known = e.tag == tags::kSealedIdentity ||
                 std::any_of(mandatory_tags().begin(), mandatory_tags().end(),
                             [&](const MandatoryTagSpec& s) { return s.tag == e.tag; });
    if (!known) {
      report.issues.push_back({Severity::kWarning, e.tag,
                               "unknown tag " + e.tag.to_string()});
    }
  }
  return report;
}

// --- Anonymization ----------------------------------------------------------

AnonymizationKey make_key(const Bytes& cipher_key, const Bytes& pseudonym_salt) {
  if (cipher_key.size() != 32) fail("InvariantViolation", "cipher key must be 32 bytes");
  if (pseudonym_salt.size() != 16) fail("InvariantViolation", "pseudonym salt must be 16 bytes");
  return AnonymizationKey{cipher_key, pseudonym_salt};
}

std::string pseudonym_for(const Bytes& salt, std::string_view patient_id) {
  Bytes input = salt;
  input.insert(input.end(), patient_id.begin(), patient_id.end());
  return std::string(kPsnPrefix) + crypto::sha256_hex(input).substr(0, 16);
}

namespace {

std::string seal_text(const Bytes& key, std::string_view plaintext) {
  Bytes sealed = crypto::aead_seal(key, util::to_bytes(plaintext));
  return std::string(kEncPrefix) + util::base64_encode(sealed);
}

std::string open_text(const Bytes& key, const std::string& field) {
  if (!util::starts_with(field, "ENC:")) {
    fail("NotAnonymized", "field lacks ENC: prefix");
  }
  if (!util::starts_with(field, kEncPrefix)) {
    fail("WrongKey", "unknown cipher scheme in field");
  }
  auto sealed = util::base64_decode(field.substr(sizeof(kEncPrefix) - 1));
  if (!sealed) fail("WrongKey", "bad base64 in sealed field");
  auto plain = crypto::aead_open(key, *sealed);
  if (!plain) fail("WrongKey", "authentication tag mismatch");
  return util::to_string(*plain);
}

}  // namespace

bool is_anonymized(const DataSet& ds) {
  const DataElement* name = ds.find(tags::kPatientName);
  return name && std::holds_alternative<std::string>(name->value) &&
         util::starts_with(name->text(), "ENC:");
}

DataSet anonymize(const DataSet& ds, const AnonymizationKey& key) {
  auto report = validate(ds);
  if (!report.ok()) fail("InvariantViolation", "dataset does not validate");

  const std::string name = ds.find(tags::kPatientName)->text();
  const std::string id = ds.find(tags::kPatientId)->text();
  const std::string birth = ds.find(tags::kBirthDate)->text();

  DataSet out = ds;
  out.set(text_element(tags::kPatientName, Vr::PN, seal_text(key.cipher_key, name)));
  out.set(text_element(tags::kPatientId, Vr::LO, pseudonym_for(key.pseudonym_salt, id)));
  // Birth year survives for age predicates; month/day are blinded and the
  // full date plus the original id travel sealed in the private tag.
  out.set(text_element(tags::kBirthDate, Vr::DA, birth.substr(0, 4) + "0101"));
  out.set(text_element(tags::kSealedIdentity, Vr::LO,
                       seal_text(key.cipher_key, birth + "\n" + id)));
  return out;
}

DataSet deanonymize(const DataSet& ds, const AnonymizationKey& key) {
  const DataElement* name = ds.find(tags::kPatientName);
  if (!name || !util::starts_with(name->text(), "ENC:")) {
    fail("NotAnonymized", "patient name is not sealed");
  }
  const DataElement* sealed = ds.find(tags::kSealedIdentity);
  if (!sealed) fail("NotAnonymized", "sealed identity tag missing");

  std::string original_name = open_text(key.cipher_key, name->text());
  std::string bundle = open_text(key.cipher_key, sealed->text());
  auto nl = bundle.find('\n');
  if (nl == std::string::npos) fail("WrongKey", "sealed identity bundle malformed");

  DataSet out = ds;
  out.set(text_element(tags::kPatientName, Vr::PN, std::move(original_name)));
  out.set(text_element(tags::kPatientId, Vr::LO, bundle.substr(nl + 1)));
  out.set(text_element(tags::kBirthDate, Vr::DA, bundle.substr(0, nl)));
  out.remove(tags::kSealedIdentity);
  return out;
}

}  // namespace mg::dicomlite
