#pragma once

#include <random>
#include <string>
#include <vector>

#include "mg/dicomlite.hpp"

// Shared test fixtures: complete mammogram records and randomized
// DataSet generation for property suites.
namespace mgtest {

using mg::dicomlite::DataSet;
using mg::dicomlite::Vr;
namespace tags = mg::dicomlite::tags;

struct MammoSpec {
  std::string sop_uid = "1.2.840.99.1.7";
  std::string study_date = "20040117";
  std::string modality = "MG";
  std::string patient_name = "DOE^JANE";
  std::string patient_id = "P001";
  std::string birth_date = "19541203";
  std::string view = "CC";
  std::string study_uid = "1.2.840.99.2.55";
  std::string series_uid = "1.2.840.99.3.55";
  std::string laterality = "L";
  std::uint16_t rows = 1024;
  std::uint16_t cols = 800;
  mg::util::Bytes pixels = {0xDE, 0xAD, 0xBE, 0xEF, 0x00, 0x11};
};

inline DataSet make_mammo(const MammoSpec& spec = {}) {
  using mg::dicomlite::blob_element;
  using mg::dicomlite::number_element;
  using mg::dicomlite::text_element;
  DataSet ds;
  ds.set(text_element(tags::kSopInstanceUid, Vr::UI, spec.sop_uid));
  ds.set(text_element(tags::kStudyDate, Vr::DA, spec.study_date));
  ds.set(text_element(tags::kModality, Vr::CS, spec.modality));
  ds.set(text_element(tags::kPatientName, Vr::PN, spec.patient_name));
  ds.set(text_element(tags::kPatientId, Vr::LO, spec.patient_id));
  ds.set(text_element(tags::kBirthDate, Vr::DA, spec.birth_date));
  ds.set(text_element(tags::kViewPosition, Vr::CS, spec.view));
  ds.set(text_element(tags::kStudyInstanceUid, Vr::UI, spec.study_uid));
  ds.set(text_element(tags::kSeriesInstanceUid, Vr::UI, spec.series_uid));
  ds.set(text_element(tags::kLaterality, Vr::CS, spec.laterality));
  ds.set(number_element(tags::kRows, spec.rows));
  ds.set(number_element(tags::kColumns, spec.cols));
  ds.set(blob_element(tags::kPixelData, spec.pixels));
  return ds;
}

// Random well-formed DataSets for round-trip property suites.
inline DataSet random_dataset(std::mt19937_64& rng) {
  using mg::dicomlite::DataElement;
  using mg::dicomlite::ElementValue;
  using mg::dicomlite::TagKey;
  DataSet ds;
  std::uniform_int_distribution<int> count_dist(0, 24);
  std::uniform_int_distribution<int> vr_dist(0, 6);
  std::uniform_int_distribution<int> len_dist(0, 40);
  std::uniform_int_distribution<int> chr(0x20, 0x7E);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::uint32_t> tag_dist(1, 0xFFFE);

  int n = count_dist(rng);
  for (int i = 0; i < n; ++i) {
    TagKey tag{static_cast<std::uint16_t>(tag_dist(rng)),
               static_cast<std::uint16_t>(tag_dist(rng))};
    Vr vr = static_cast<Vr>(vr_dist(rng));
    DataElement element;
    element.tag = tag;
    element.vr = vr;
    switch (vr) {
      case Vr::US:
        element.value = static_cast<std::uint16_t>(byte(rng) * 251 % 65536);
        break;
      case Vr::OB: {
        mg::util::Bytes b(static_cast<std::size_t>(len_dist(rng)));
        for (auto& v : b) v = static_cast<std::uint8_t>(byte(rng));
        element.value = std::move(b);
        break;
      }
      default: {
        std::string s(static_cast<std::size_t>(len_dist(rng)), ' ');
        for (auto& c : s) c = static_cast<char>(chr(rng));
        element.value = std::move(s);
        break;
      }
    }
    ds.set(std::move(element));  // set() keeps order and dedupes tags
  }
  return ds;
}

}  // namespace mgtest
