#include <doctest.h>

#include <map>
#include <random>

#include "mg/catalog.hpp"
#include "mg/crypto.hpp"

using namespace mg;
using namespace mg::catalog;

namespace {

#define CHECK_FAILS_WITH(expr, expected_code)          \
  do {                                                 \
    try {                                              \
      (void)(expr);                                    \
      FAIL("expected " expected_code ", none thrown"); \
    } catch (const Error& e) {                         \
      CHECK(e.code() == std::string(expected_code));   \
    }                                                  \
  } while (0)

CatalogStore store_with_schema() {
  CatalogStore store;
  store.mkdir("/mg");
  MetadataSchema schema;
  schema.dir = "/mg";
  schema.columns = {{"age", ColumnType::kInt},
                    {"laterality", ColumnType::kText},
                    {"study_date", ColumnType::kDate},
                    {"dose", ColumnType::kFloat}};
  store.attach_schema(schema);
  return store;
}

PhysicalLocation loc(const std::string& se = "se-a", const std::string& key = "k1") {
  return {se, key};
}

}  // namespace

TEST_CASE("logical name validation") {
  CHECK(valid_logical_name("/"));
  CHECK(valid_logical_name("/mg/udine/img_01.v1"));
  CHECK_FALSE(valid_logical_name("mg/udine"));
  CHECK_FALSE(valid_logical_name("/mg//x"));
  CHECK_FALSE(valid_logical_name("/mg/x y"));
  CHECK(parent_of("/mg/udine/img") == "/mg/udine");
  CHECK(parent_of("/mg") == "/");
}

TEST_CASE("mkdir is idempotent and checks parents") {
  CatalogStore store;
  store.mkdir("/mg");
  store.mkdir("/mg");  // second call is a no-op
  CHECK(store.dir_exists("/mg"));
  CHECK_FAILS_WITH(store.mkdir("/a/b/c"), "ParentMissing");
}

TEST_CASE("register then lookup round-trips every field") {
  CatalogStore store = store_with_schema();
  std::string guid = store.register_file("/mg/x", loc(), 42, "abc123", "udine-vo");
  const FileEntry& entry = store.lookup("/mg/x");
  CHECK(entry.guid == guid);
  CHECK(entry.lfn == "/mg/x");
  CHECK(entry.size == 42);
  CHECK(entry.checksum == "abc123");
  CHECK(entry.owner_vo == "udine-vo");
  CHECK(entry.version == 1);
  REQUIRE(entry.replicas.size() == 1);
  CHECK(entry.replicas[0] == loc());
}

TEST_CASE("duplicate lfn and missing parent are rejected") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc(), 1, "c", "vo");
  CHECK_FAILS_WITH(store.register_file("/mg/x", loc(), 1, "c", "vo"), "AlreadyExists");
  CHECK_FAILS_WITH(store.register_file("/nodir/x", loc(), 1, "c", "vo"), "ParentMissing");
}

TEST_CASE("fifty registrations draw fifty distinct guids") {
  CatalogStore store = store_with_schema();
  crypto::Rng rng(7);
  store.set_guid_source([&rng] { return rng.hex(16); });
  std::set<std::string> guids;
  for (int i = 0; i < 50; ++i) {
    guids.insert(store.register_file("/mg/f" + std::to_string(i), loc("se", "k" + std::to_string(i)),
                                     1, "c", "vo"));
  }
  CHECK(guids.size() == 50);
}

TEST_CASE("add_replica verifies checksums and rejects duplicates") {
  CatalogStore store = store_with_schema();
  std::map<std::string, std::string> digests{{"se-a:k1", "good"}, {"se-b:k1", "good"},
                                             {"se-c:k1", "BAD"}};
  store.set_replica_verifier([&](const PhysicalLocation& l) -> std::optional<std::string> {
    auto it = digests.find(l.se_id + ":" + l.object_key);
    if (it == digests.end()) return std::nullopt;
    return it->second;
  });
  store.register_file("/mg/x", loc("se-a"), 4, "good", "vo");
  store.add_replica("/mg/x", loc("se-b"));
  CHECK(store.lookup("/mg/x").replicas.size() == 2);
  // Canonical order by se_id.
  CHECK(store.lookup("/mg/x").replicas[0].se_id == "se-a");
  CHECK(store.lookup("/mg/x").replicas[1].se_id == "se-b");

  CHECK_FAILS_WITH(store.add_replica("/mg/x", loc("se-b")), "DuplicateReplica");
  CHECK_FAILS_WITH(store.add_replica("/mg/x", loc("se-c")), "ChecksumMismatch");
  CHECK_FAILS_WITH(store.add_replica("/mg/nope", loc()), "NotFound");
}

TEST_CASE("lookup of a missing path") {
  CatalogStore store;
  CHECK_FAILS_WITH(store.lookup("/mg/missing"), "NotFound");
}

TEST_CASE("nested schemas are forbidden") {
  CatalogStore store = store_with_schema();
  store.mkdir("/mg/sub");
  MetadataSchema nested;
  nested.dir = "/mg/sub";
  nested.columns = {{"x", ColumnType::kInt}};
  CHECK_FAILS_WITH(store.attach_schema(nested), "SchemaConflict");
}

TEST_CASE("set_attrs checks schema types and merges per key") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc(), 1, "c", "vo");
  store.set_attrs("/mg/x", {{"laterality", "L"}, {"age", "50"}});
  CHECK(std::get<std::string>(store.lookup("/mg/x").attrs.at("laterality")) == "L");
  CHECK(std::get<std::int64_t>(store.lookup("/mg/x").attrs.at("age")) == 50);

  store.set_attrs("/mg/x", {{"laterality", "R"}});  // last write wins
  CHECK(std::get<std::string>(store.lookup("/mg/x").attrs.at("laterality")) == "R");
  CHECK(std::get<std::int64_t>(store.lookup("/mg/x").attrs.at("age")) == 50);

  CHECK_FAILS_WITH(store.set_attrs("/mg/x", {{"age", "fifty"}}), "TypeMismatch");
  CHECK_FAILS_WITH(store.set_attrs("/mg/x", {{"height", "3"}}), "UnknownAttribute");
}

TEST_CASE("find rejects attrs and literals the schema does not know") {
  CatalogStore store = store_with_schema();
  CHECK_FAILS_WITH(
      store.find("/mg", CatalogQuery{make_compare("height", CmpOp::kGt, std::int64_t{3})}),
      "UnknownAttribute");
  CHECK_FAILS_WITH(
      store.find("/mg", CatalogQuery{make_compare("age", CmpOp::kEq, std::string("old"))}),
      "TypeMismatch");
}

TEST_CASE("find on an empty catalogue returns nothing") {
  CatalogStore store = store_with_schema();
  CHECK(store.find("/mg", CatalogQuery{}).empty());
}

TEST_CASE("tautology returns every entry, sorted") {
  CatalogStore store = store_with_schema();
  for (int i = 9; i >= 0; --i) {
    std::string lfn = "/mg/f" + std::to_string(i);
    store.register_file(lfn, loc("se", std::to_string(i)), 1, "c", "vo");
    store.set_attrs(lfn, {{"age", std::to_string(40 + i)}});
  }
  auto rows = store.find("/mg", CatalogQuery{make_compare("age", CmpOp::kGe, std::int64_t{0})});
  REQUIRE(rows.size() == 10);
  CHECK(std::is_sorted(rows.begin(), rows.end()));
}

TEST_CASE("missing attribute evaluates false, also under NOT") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/with", loc("se", "1"), 1, "c", "vo");
  store.set_attrs("/mg/with", {{"age", "50"}});
  store.register_file("/mg/without", loc("se", "2"), 1, "c", "vo");

  auto rows = store.find("/mg", CatalogQuery{make_compare("age", CmpOp::kGe, std::int64_t{0})});
  CHECK(rows == std::vector<std::string>{"/mg/with"});

  // NOT flips the leaf's false to true: entries lacking the attr match.
  rows = store.find("/mg", CatalogQuery{make_not(make_compare("age", CmpOp::kGe, std::int64_t{0}))});
  CHECK(rows == std::vector<std::string>{"/mg/without"});
}

// Independent oracle: a plain linear scan evaluating the same NULL
// semantics, structurally unrelated to CatalogStore::find.
namespace {

bool oracle_eval(const PredicatePtr& p, const std::map<std::string, AttrValue>& attrs);

bool oracle_compare(const Comparison& cmp, const std::map<std::string, AttrValue>& attrs) {
  auto it = attrs.find(cmp.attr);
  if (it == attrs.end()) return false;
  auto text = [](const AttrValue& v) { return attr_value_to_text(v); };
  auto num = [](const AttrValue& v) -> std::optional<double> {
    if (std::holds_alternative<std::int64_t>(v)) return double(std::get<std::int64_t>(v));
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    return std::nullopt;
  };
  if (cmp.op == CmpOp::kContains) {
    return text(it->second).find(text(cmp.literal)) != std::string::npos;
  }
  auto a = num(it->second);
  auto b = num(cmp.literal);
  int c;
  if (a && b) {
    c = *a < *b ? -1 : (*a > *b ? 1 : 0);
  } else {
    std::string ta = text(it->second), tb = text(cmp.literal);
    c = ta < tb ? -1 : (ta == tb ? 0 : 1);
  }
  switch (cmp.op) {
    case CmpOp::kEq: return c == 0;
    case CmpOp::kNe: return c != 0;
    case CmpOp::kLt: return c < 0;
    case CmpOp::kLe: return c <= 0;
    case CmpOp::kGt: return c > 0;
    case CmpOp::kGe: return c >= 0;
    default: return false;
  }
}

bool oracle_eval(const PredicatePtr& p, const std::map<std::string, AttrValue>& attrs) {
  if (!p) return true;
  switch (p->kind) {
    case Predicate::Kind::kCompare: return oracle_compare(p->cmp, attrs);
    case Predicate::Kind::kAnd: {
      for (const auto& c : p->children) {
        if (!oracle_eval(c, attrs)) return false;
      }
      return true;
    }
    case Predicate::Kind::kOr: {
      for (const auto& c : p->children) {
        if (oracle_eval(c, attrs)) return true;
      }
      return false;
    }
    case Predicate::Kind::kNot: return !oracle_eval(p->children[0], attrs);
  }
  return false;
}

PredicatePtr random_predicate(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> kind_dist(0, depth > 0 ? 3 : 0);
  std::uniform_int_distribution<int> attr_dist(0, 3);
  std::uniform_int_distribution<int> op_dist(0, 6);
  std::uniform_int_distribution<int> age_dist(30, 70);
  std::uniform_int_distribution<int> lat_dist(0, 1);
  std::uniform_int_distribution<int> day_dist(1, 28);
  std::uniform_int_distribution<int> width_dist(2, 3);

  switch (kind_dist(rng)) {
    case 1: {
      std::vector<PredicatePtr> kids;
      int n = width_dist(rng);
      for (int i = 0; i < n; ++i) kids.push_back(random_predicate(rng, depth - 1));
      return make_and(std::move(kids));
    }
    case 2: {
      std::vector<PredicatePtr> kids;
      int n = width_dist(rng);
      for (int i = 0; i < n; ++i) kids.push_back(random_predicate(rng, depth - 1));
      return make_or(std::move(kids));
    }
    case 3:
      return make_not(random_predicate(rng, depth - 1));
    default:
      break;
  }
  CmpOp op = static_cast<CmpOp>(op_dist(rng));
  switch (attr_dist(rng)) {
    case 0:
      if (op == CmpOp::kContains) op = CmpOp::kEq;  // CONTAINS over ints is unnatural
      return make_compare("age", op, static_cast<std::int64_t>(age_dist(rng)));
    case 1:
      return make_compare("laterality", op, std::string(lat_dist(rng) ? "L" : "R"));
    case 2: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "2004-01-%02d", day_dist(rng));
      return make_compare("study_date", op, std::string(buf));
    }
    default:
      if (op == CmpOp::kContains) op = CmpOp::kLe;
      return make_compare("dose", op, 0.5 + 0.01 * age_dist(rng));
  }
}

}  // namespace

TEST_CASE("find equals the brute-force oracle on randomized fixtures") {
  std::mt19937_64 rng(424242);
  std::uniform_int_distribution<int> entry_count(0, 60);
  std::uniform_int_distribution<int> age_dist(30, 70);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> day_dist(1, 28);

  for (int round = 0; round < 60; ++round) {
    CatalogStore store = store_with_schema();
    std::map<std::string, std::map<std::string, AttrValue>> shadow;
    int n = entry_count(rng);
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "/mg/e%03d", i);
      store.register_file(name, loc("se", std::to_string(i)), 1, "c", "vo");
      std::map<std::string, AttrValue> attrs;
      if (coin(rng)) attrs["age"] = static_cast<std::int64_t>(age_dist(rng));
      if (coin(rng)) attrs["laterality"] = std::string(coin(rng) ? "L" : "R");
      if (coin(rng)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "2004-01-%02d", day_dist(rng));
        attrs["study_date"] = std::string(buf);
      }
      if (coin(rng)) attrs["dose"] = 0.5 + 0.01 * age_dist(rng);
      if (!attrs.empty()) store.set_attrs_typed(name, attrs);
      shadow[name] = attrs;
    }
    CatalogQuery q{random_predicate(rng, 3)};
    std::vector<std::string> expected;
    for (const auto& [lfn, attrs] : shadow) {
      if (oracle_eval(q.root, attrs)) expected.push_back(lfn);
    }
    CHECK(store.find("/mg", q) == expected);
  }
}

TEST_CASE("query text form round-trips") {
  std::mt19937_64 rng(5150);
  for (int i = 0; i < 200; ++i) {
    CatalogQuery q{random_predicate(rng, 3)};
    std::string text = q.render();
    CatalogQuery back = CatalogQuery::parse(text);
    CHECK(back.render() == text);
  }
  CHECK(CatalogQuery::parse("(ALL)").render() == "(ALL)");
}

TEST_CASE("owner_vo is immutable across operations") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc(), 1, "c", "udine-vo");
  store.set_attrs("/mg/x", {{"age", "44"}});
  store.update_content("/mg/x", loc("se-a", "k2"), 2, "c2");
  store.set_attrs("/mg/x", {{"laterality", "L"}});
  CHECK(store.lookup("/mg/x").owner_vo == "udine-vo");
}

TEST_CASE("versioning keeps prior versions addressable") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc("se-a", "k1"), 3, "v1sum", "vo");
  std::uint32_t v2 = store.update_content("/mg/x", loc("se-a", "k2"), 5, "v2sum");
  CHECK(v2 == 2);
  CHECK(store.lookup("/mg/x").version == 2);
  CHECK(store.lookup("/mg/x").checksum == "v2sum");

  VersionRecord old = store.lookup_version("/mg/x", 1);
  CHECK(old.checksum == "v1sum");
  CHECK(old.replicas[0].object_key == "k1");
  CHECK_FAILS_WITH(store.lookup_version("/mg/x", 9), "NotFound");
}

TEST_CASE("mutation log lines carry sequence numbers and ops") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc(), 1, "c", "vo");
  const auto& log = store.mutation_log();
  REQUIRE(log.size() >= 3);  // mkdir, attach_schema, register
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].seq == i + 1);
    CHECK(util::starts_with(log[i].line, "SEQ " + std::to_string(i + 1) + " "));
  }
}

TEST_CASE("snapshot and restore preserve entries, schemas and history") {
  CatalogStore store = store_with_schema();
  store.register_file("/mg/x", loc("se-a", "k1"), 3, "v1", "udine-vo");
  store.set_attrs("/mg/x", {{"age", "61"}, {"laterality", "L"}});
  store.update_content("/mg/x", loc("se-a", "k2"), 4, "v2");

  CatalogStore copy = CatalogStore::restore(store.snapshot());
  const FileEntry& entry = copy.lookup("/mg/x");
  CHECK(entry.guid == store.lookup("/mg/x").guid);
  CHECK(entry.version == 2);
  CHECK(std::get<std::int64_t>(entry.attrs.at("age")) == 61);
  CHECK(copy.lookup_version("/mg/x", 1).checksum == "v1");
  CHECK(copy.dir_exists("/mg"));
  // The restored catalogue answers queries identically.
  auto rows = copy.find("/mg", CatalogQuery{make_compare("age", CmpOp::kGt, std::int64_t{60})});
  CHECK(rows == std::vector<std::string>{"/mg/x"});
}
