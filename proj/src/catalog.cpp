#include "mg/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "mg/crypto.hpp"

namespace mg::catalog {

bool valid_logical_name(std::string_view lfn) {
  if (lfn.empty() || lfn[0] != '/') return false;
  if (lfn == "/") return true;
  auto segments = util::split(lfn.substr(1), '/');
  for (const auto& seg : segments) {
    if (seg.empty()) return false;
    for (unsigned char c : seg) {
      if (!(std::isalnum(c) || c == '_' || c == '.' || c == '-')) return false;
    }
  }
  return true;
}

std::string parent_of(std::string_view lfn) {
  auto pos = lfn.rfind('/');
  if (pos == 0) return "/";
  return std::string(lfn.substr(0, pos));
}

const char* column_type_name(ColumnType t) {
  switch (t) {
    case ColumnType::kInt: return "INT";
    case ColumnType::kText: return "TEXT";
    case ColumnType::kDate: return "DATE";
    case ColumnType::kFloat: return "FLOAT";
  }
  return "?";
}

std::optional<ColumnType> column_type_from(std::string_view name) {
  if (name == "INT") return ColumnType::kInt;
  if (name == "TEXT") return ColumnType::kText;
  if (name == "DATE") return ColumnType::kDate;
  if (name == "FLOAT") return ColumnType::kFloat;
  return std::nullopt;
}

std::string attr_value_to_text(const AttrValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) {
    std::ostringstream os;
    os << std::get<double>(v);
    return os.str();
  }
  return std::get<std::string>(v);
}

namespace {

bool valid_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

}  // namespace

AttrValue parse_attr_value(ColumnType type, std::string_view text) {
  switch (type) {
    case ColumnType::kInt: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) {
        fail("TypeMismatch", "'" + std::string(text) + "' is not an INT");
      }
      return v;
    }
    case ColumnType::kFloat: {
      try {
        std::size_t used = 0;
        double v = std::stod(std::string(text), &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        fail("TypeMismatch", "'" + std::string(text) + "' is not a FLOAT");
      }
    }
    case ColumnType::kDate:
      if (!valid_iso_date(text)) {
        fail("TypeMismatch", "'" + std::string(text) + "' is not a DATE (YYYY-MM-DD)");
      }
      return std::string(text);
    case ColumnType::kText:
      return std::string(text);
  }
  fail("TypeMismatch", "unknown column type");
}

// --- Predicates -----------------------------------------------------------

const char* cmp_op_name(CmpOp op) {
  switch (op) {
    case CmpOp::kEq: return "=";
    case CmpOp::kNe: return "!=";
    case CmpOp::kLt: return "<";
    case CmpOp::kLe: return "<=";
    case CmpOp::kGt: return ">";
    case CmpOp::kGe: return ">=";
    case CmpOp::kContains: return "CONTAINS";
  }
  return "?";
}

PredicatePtr make_compare(std::string attr, CmpOp op, AttrValue literal) {
  auto p = std::make_shared<Predicate>();
  p->kind = Predicate::Kind::kCompare;
  p->cmp = Comparison{std::move(attr), op, std::move(literal)};
  return p;
}

PredicatePtr make_and(std::vector<PredicatePtr> children) {
  auto p = std::make_shared<Predicate>();
  p->kind = Predicate::Kind::kAnd;
  p->children = std::move(children);
  return p;
}

PredicatePtr make_or(std::vector<PredicatePtr> children) {
  auto p = std::make_shared<Predicate>();
  p->kind = Predicate::Kind::kOr;
  p->children = std::move(children);
  return p;
}

PredicatePtr make_not(PredicatePtr child) {
  auto p = std::make_shared<Predicate>();
  p->kind = Predicate::Kind::kNot;
  p->children = {std::move(child)};
  return p;
}

namespace {

int compare_values(const AttrValue& a, const AttrValue& b) {
  // INT and FLOAT columns compare numerically against either numeric
  // literal form; everything else compares as text.
  auto as_double = [](const AttrValue& v) -> std::optional<double> {
    if (std::holds_alternative<std::int64_t>(v)) return static_cast<double>(std::get<std::int64_t>(v));
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    return std::nullopt;
  };
  auto da = as_double(a);
  auto db = as_double(b);
  if (da && db) {
    if (*da < *db) return -1;
    if (*da > *db) return 1;
    return 0;
  }
  const std::string ta = attr_value_to_text(a);
  const std::string tb = attr_value_to_text(b);
  return ta.compare(tb) < 0 ? -1 : (ta == tb ? 0 : 1);
}

bool eval_comparison(const Comparison& cmp, const std::map<std::string, AttrValue>& attrs) {
  auto it = attrs.find(cmp.attr);
  if (it == attrs.end()) return false;  // missing attribute: never matches
  if (cmp.op == CmpOp::kContains) {
    return attr_value_to_text(it->second).find(attr_value_to_text(cmp.literal)) !=
           std::string::npos;
  }
  int c = compare_values(it->second, cmp.literal);
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

}  // namespace

bool eval_predicate(const PredicatePtr& p, const std::map<std::string, AttrValue>& attrs) {
  if (!p) return true;
  switch (p->kind) {
    case Predicate::Kind::kCompare:
      return eval_comparison(p->cmp, attrs);
    case Predicate::Kind::kAnd:
      return std::all_of(p->children.begin(), p->children.end(),
                         [&](const PredicatePtr& c) { return eval_predicate(c, attrs); });
    case Predicate::Kind::kOr:
      return std::any_of(p->children.begin(), p->children.end(),
                         [&](const PredicatePtr& c) { return eval_predicate(c, attrs); });
    case Predicate::Kind::kNot:
      return !eval_predicate(p->children.at(0), attrs);
  }
  return false;
}

// Canonical text form: prefix s-expressions with typed literals, e.g.
//   (AND (= laterality "L") (<= birth_year 1954))
namespace {

void render_predicate(const PredicatePtr& p, std::string& out) {
  switch (p->kind) {
    case Predicate::Kind::kCompare: {
      out += '(';
      out += cmp_op_name(p->cmp.op);
      out += ' ';
      out += p->cmp.attr;
      out += ' ';
      if (std::holds_alternative<std::string>(p->cmp.literal)) {
        out += '"';
        out += util::percent_encode(std::get<std::string>(p->cmp.literal), "\"() ");
        out += '"';
      } else {
        out += attr_value_to_text(p->cmp.literal);
      }
      out += ')';
      break;
    }
    case Predicate::Kind::kAnd:
    case Predicate::Kind::kOr: {
      out += '(';
      out += p->kind == Predicate::Kind::kAnd ? "AND" : "OR";
      for (const auto& c : p->children) {
        out += ' ';
        render_predicate(c, out);
      }
      out += ')';
      break;
    }
    case Predicate::Kind::kNot: {
      out += "(NOT ";
      render_predicate(p->children.at(0), out);
      out += ')';
      break;
    }
  }
}

struct QueryTextParser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && text[pos] == ' ') ++pos;
  }

  [[noreturn]] void bail(const std::string& why) {
    fail("MalformedQuery", why + " at offset " + std::to_string(pos));
  }

  std::string token() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '(' && text[pos] != ')') ++pos;
    if (start == pos) bail("expected token");
    return std::string(text.substr(start, pos - start));
  }

  PredicatePtr parse_node() {
    skip_ws();
    if (pos >= text.size() || text[pos] != '(') bail("expected '('");
    ++pos;
    std::string head = token();
    PredicatePtr result;
    if (head == "AND" || head == "OR") {
      std::vector<PredicatePtr> children;
      skip_ws();
      while (pos < text.size() && text[pos] == '(') {
        children.push_back(parse_node());
        skip_ws();
      }
      if (children.empty()) bail("empty combinator");
      result = head == "AND" ? make_and(std::move(children)) : make_or(std::move(children));
    } else if (head == "NOT") {
      result = make_not(parse_node());
      skip_ws();
    } else {
      CmpOp op;
      if (head == "=") op = CmpOp::kEq;
      else if (head == "!=") op = CmpOp::kNe;
      else if (head == "<") op = CmpOp::kLt;
      else if (head == "<=") op = CmpOp::kLe;
      else if (head == ">") op = CmpOp::kGt;
      else if (head == ">=") op = CmpOp::kGe;
      else if (head == "CONTAINS") op = CmpOp::kContains;
      else bail("unknown operator '" + head + "'");
      std::string attr = token();
      skip_ws();
      AttrValue literal;
      if (pos < text.size() && text[pos] == '"') {
        ++pos;
        std::size_t start = pos;
        while (pos < text.size() && text[pos] != '"') ++pos;
        if (pos >= text.size()) bail("unterminated string literal");
        auto decoded = util::percent_decode(text.substr(start, pos - start));
        if (!decoded) bail("bad literal encoding");
        literal = *decoded;
        ++pos;
      } else {
        std::string lit = token();
        if (lit.find('.') != std::string::npos) {
          literal = std::stod(lit);
        } else {
          std::int64_t v = 0;
          auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
          if (ec != std::errc() || p != lit.data() + lit.size()) bail("bad numeric literal");
          literal = v;
        }
      }
      result = make_compare(std::move(attr), op, std::move(literal));
    }
    skip_ws();
    if (pos >= text.size() || text[pos] != ')') bail("expected ')'");
    ++pos;
    return result;
  }
};

}  // namespace

std::string CatalogQuery::render() const {
  if (!root) return "(ALL)";
  std::string out;
  render_predicate(root, out);
  return out;
}

CatalogQuery CatalogQuery::parse(std::string_view text) {
  std::string trimmed = util::trim(text);
  if (trimmed == "(ALL)") return CatalogQuery{};
  QueryTextParser parser{trimmed};
  CatalogQuery q{parser.parse_node()};
  parser.skip_ws();
  if (parser.pos != trimmed.size()) parser.bail("trailing input");
  return q;
}

// --- Store ------------------------------------------------------------------

CatalogStore::CatalogStore() {
  dirs_.insert("/");
}

void CatalogStore::set_replica_verifier(ReplicaVerifier verifier) {
  verifier_ = std::move(verifier);
}

void CatalogStore::set_guid_source(std::function<std::string()> source) {
  guid_source_ = std::move(source);
}

void CatalogStore::log_mutation(const std::string& op, const std::vector<std::string>& args) {
  std::string line = "SEQ " + std::to_string(next_seq_) + " " + op;
  for (const auto& a : args) {
    line += ' ';
    line += util::percent_encode(a, " ");
  }
  log_.push_back({next_seq_, line});
  ++next_seq_;
}

void CatalogStore::mkdir(const std::string& lfn) {
  if (!valid_logical_name(lfn) || lfn == "/") fail("ParentMissing", "bad directory name " + lfn);
  if (dirs_.count(lfn)) return;  // idempotent
  if (!dirs_.count(parent_of(lfn))) fail("ParentMissing", "no parent for " + lfn);
  dirs_.insert(lfn);
  log_mutation("mkdir", {lfn});
}

bool CatalogStore::dir_exists(const std::string& lfn) const {
  return dirs_.count(lfn) > 0;
}

std::string CatalogStore::register_file(const std::string& lfn, const PhysicalLocation& location,
                                        std::uint64_t size, const std::string& checksum,
                                        const std::string& owner_vo, const std::string& guid_in) {
  if (!valid_logical_name(lfn)) fail("ParentMissing", "bad logical name " + lfn);
  if (entries_.count(lfn)) fail("AlreadyExists", lfn);
  if (!dirs_.count(parent_of(lfn))) fail("ParentMissing", "no parent dir for " + lfn);

  std::string guid = guid_in;
  if (guid.empty()) {
    do {
      guid = guid_source_ ? guid_source_() : crypto::sha256_hex(lfn).substr(0, 32);
    } while (guids_.count(guid));
  }
  guids_.insert(guid);

  FileEntry entry;
  entry.guid = guid;
  entry.lfn = lfn;
  entry.size = size;
  entry.checksum = checksum;
  entry.owner_vo = owner_vo;
  entry.version = 1;
  entry.replicas = {location};
  entry.history[1] = VersionRecord{size, checksum, {location}};
  entries_[lfn] = std::move(entry);
  log_mutation("register", {lfn, guid, std::to_string(size), checksum, owner_vo,
                            location.se_id, location.object_key});
  return guid;
}

FileEntry& CatalogStore::entry_for_update(const std::string& lfn) {
  auto it = entries_.find(lfn);
  if (it == entries_.end()) fail("NotFound", lfn);
  return it->second;
}

void CatalogStore::add_replica(const std::string& lfn, const PhysicalLocation& location) {
  FileEntry& entry = entry_for_update(lfn);
  if (std::find(entry.replicas.begin(), entry.replicas.end(), location) !=
      entry.replicas.end()) {
    fail("DuplicateReplica", location.se_id + ":" + location.object_key);
  }
  if (verifier_) {
    auto digest = verifier_(location);
    if (!digest || *digest != entry.checksum) {
      fail("ChecksumMismatch", "replica at " + location.se_id + " does not match " + entry.checksum);
    }
  }
  entry.replicas.push_back(location);
  std::sort(entry.replicas.begin(), entry.replicas.end());
  entry.history[entry.version].replicas = entry.replicas;
  log_mutation("add_replica", {lfn, location.se_id, location.object_key});
}

const FileEntry& CatalogStore::lookup(const std::string& lfn) const {
  auto it = entries_.find(lfn);
  if (it == entries_.end()) fail("NotFound", lfn);
  return it->second;
}

const FileEntry* CatalogStore::try_lookup(const std::string& lfn) const {
  auto it = entries_.find(lfn);
  return it == entries_.end() ? nullptr : &it->second;
}

VersionRecord CatalogStore::lookup_version(const std::string& lfn, std::uint32_t version) const {
  const FileEntry& entry = lookup(lfn);
  auto it = entry.history.find(version);
  if (it == entry.history.end()) {
    fail("NotFound", lfn + " version " + std::to_string(version));
  }
  return it->second;
}

void CatalogStore::attach_schema(const MetadataSchema& schema) {
  if (!dirs_.count(schema.dir)) fail("ParentMissing", "schema dir missing: " + schema.dir);
  for (const auto& [dir, existing] : schemas_) {
    bool nested = util::starts_with(schema.dir, dir + "/") ||
                  util::starts_with(dir, schema.dir + "/") || dir == schema.dir;
    if (nested) {
      fail("SchemaConflict", "schema at " + dir + " overlaps " + schema.dir);
    }
  }
  schemas_[schema.dir] = schema;
  std::vector<std::string> args{schema.dir};
  for (const auto& [name, type] : schema.columns) {
    args.push_back(name + ":" + column_type_name(type));
  }
  log_mutation("attach_schema", args);
}

const MetadataSchema* CatalogStore::governing_schema(const std::string& lfn) const {
  for (const auto& [dir, schema] : schemas_) {
    if (lfn == dir || util::starts_with(lfn, dir + "/")) return &schema;
  }
  return nullptr;
}

void CatalogStore::check_attr_types(const MetadataSchema& schema,
                                    const std::map<std::string, AttrValue>& kv) const {
  for (const auto& [name, value] : kv) {
    auto col = schema.columns.find(name);
    if (col == schema.columns.end()) fail("UnknownAttribute", name);
    bool ok = false;
    switch (col->second) {
      case ColumnType::kInt: ok = std::holds_alternative<std::int64_t>(value); break;
      case ColumnType::kFloat: ok = std::holds_alternative<double>(value); break;
      case ColumnType::kDate:
        ok = std::holds_alternative<std::string>(value) &&
             valid_iso_date(std::get<std::string>(value));
        break;
      case ColumnType::kText: ok = std::holds_alternative<std::string>(value); break;
    }
    if (!ok) {
      fail("TypeMismatch", name + " must be " + column_type_name(col->second));
    }
  }
}

void CatalogStore::set_attrs(const std::string& lfn, const std::map<std::string, std::string>& kv) {
  const MetadataSchema* schema = governing_schema(lfn);
  if (!schema) fail("UnknownAttribute", "no schema governs " + lfn);
  std::map<std::string, AttrValue> typed;
  for (const auto& [name, text] : kv) {
    auto col = schema->columns.find(name);
    if (col == schema->columns.end()) fail("UnknownAttribute", name);
    typed[name] = parse_attr_value(col->second, text);
  }
  set_attrs_typed(lfn, typed);
}

void CatalogStore::set_attrs_typed(const std::string& lfn,
                                   const std::map<std::string, AttrValue>& kv) {
  FileEntry& entry = entry_for_update(lfn);
  const MetadataSchema* schema = governing_schema(lfn);
  if (!schema) fail("UnknownAttribute", "no schema governs " + lfn);
  check_attr_types(*schema, kv);
  std::vector<std::string> args{lfn};
  for (const auto& [name, value] : kv) {  // last write wins per key
    entry.attrs[name] = value;
    args.push_back(name + "=" + attr_value_to_text(value));
  }
  log_mutation("set_attrs", args);
}

std::uint32_t CatalogStore::update_content(const std::string& lfn,
                                           const PhysicalLocation& location,
                                           std::uint64_t size, const std::string& checksum) {
  FileEntry& entry = entry_for_update(lfn);
  entry.version += 1;
  entry.size = size;
  entry.checksum = checksum;
  entry.replicas = {location};
  entry.history[entry.version] = VersionRecord{size, checksum, {location}};
  log_mutation("update", {lfn, std::to_string(entry.version), std::to_string(size), checksum,
                          location.se_id, location.object_key});
  return entry.version;
}

void CatalogStore::mark_mirrored(const std::string& lfn, const std::string& from_site) {
  entry_for_update(lfn).mirrored_from = from_site;
}

void CatalogStore::erase_entry(const std::string& lfn) {
  auto it = entries_.find(lfn);
  if (it == entries_.end()) return;
  entries_.erase(it);
  log_mutation("erase", {lfn});
}

std::vector<std::string> CatalogStore::find(const std::string& dir_prefix,
                                            const CatalogQuery& q) const {
  const MetadataSchema* schema = governing_schema(dir_prefix);
  // Type-check the query against the governing schema before scanning.
  if (q.root) {
    std::vector<const Predicate*> stack{q.root.get()};
    while (!stack.empty()) {
      const Predicate* p = stack.back();
      stack.pop_back();
      if (p->kind == Predicate::Kind::kCompare) {
        if (!schema) fail("UnknownAttribute", "no schema governs " + dir_prefix);
        auto col = schema->columns.find(p->cmp.attr);
        if (col == schema->columns.end()) fail("UnknownAttribute", p->cmp.attr);
        bool ok = false;
        switch (col->second) {
          case ColumnType::kInt: ok = std::holds_alternative<std::int64_t>(p->cmp.literal); break;
          case ColumnType::kFloat:
            ok = std::holds_alternative<double>(p->cmp.literal) ||
                 std::holds_alternative<std::int64_t>(p->cmp.literal);
            break;
          case ColumnType::kDate:
          case ColumnType::kText: ok = std::holds_alternative<std::string>(p->cmp.literal); break;
        }
        if (!ok) {
          fail("TypeMismatch", p->cmp.attr + " requires a " +
                                   column_type_name(col->second) + " literal");
        }
      }
      for (const auto& c : p->children) stack.push_back(c.get());
    }
  }
  std::vector<std::string> out;
  for (const auto& [lfn, entry] : entries_) {  // map order is lexicographic
    bool under = lfn == dir_prefix || util::starts_with(lfn, dir_prefix == "/" ? "/" : dir_prefix + "/");
    if (!under) continue;
    if (eval_predicate(q.root, entry.attrs)) out.push_back(lfn);
  }
  return out;
}

std::vector<const FileEntry*> CatalogStore::entries_under(const std::string& dir_prefix) const {
  std::vector<const FileEntry*> out;
  for (const auto& [lfn, entry] : entries_) {
    if (lfn == dir_prefix || util::starts_with(lfn, dir_prefix == "/" ? "/" : dir_prefix + "/")) {
      out.push_back(&entry);
    }
  }
  return out;
}

std::vector<const FileEntry*> CatalogStore::all_entries() const {
  std::vector<const FileEntry*> out;
  out.reserve(entries_.size());
  for (const auto& [lfn, entry] : entries_) out.push_back(&entry);
  return out;
}

// --- Snapshot ----------------------------------------------------------------

std::string FileEntry::render() const {
  std::string out;
  auto field = [&](std::string_view k, std::string_view v) {
    out += k;
    out += '=';
    out += util::percent_encode(v);
    out += '\n';
  };
  field("lfn", lfn);
  field("guid", guid);
  field("size", std::to_string(size));
  field("checksum", checksum);
  field("owner_vo", owner_vo);
  field("version", std::to_string(version));
  for (const auto& r : replicas) field("replica", r.se_id + "|" + r.object_key);
  for (const auto& [name, value] : attrs) field("attr." + name, attr_value_to_text(value));
  for (const auto& [v, rec] : history) {
    std::string hv = std::to_string(v) + "|" + std::to_string(rec.size) + "|" + rec.checksum;
    for (const auto& r : rec.replicas) hv += "|" + r.se_id + "^" + r.object_key;
    field("hist", hv);
  }
  if (!mirrored_from.empty()) field("mirrored_from", mirrored_from);
  return out;
}

std::string CatalogStore::snapshot() const {
  std::string out = "MGCAT/1\n";
  for (const auto& d : dirs_) {
    out += "dir=" + util::percent_encode(d) + "\n";
  }
  for (const auto& [dir, schema] : schemas_) {
    out += "schema=" + util::percent_encode(dir);
    for (const auto& [name, type] : schema.columns) {
      out += std::string("|") + name + ":" + column_type_name(type);
    }
    out += '\n';
  }
  for (const auto& [lfn, entry] : entries_) {
    out += "entry\n";
    out += entry.render();
    out += "end\n";
  }
  return out;
}

CatalogStore CatalogStore::restore(const std::string& snapshot_text) {
  CatalogStore store;
  auto lines = util::split(snapshot_text, '\n');
  if (lines.empty() || lines[0] != "MGCAT/1") fail("MalformedSnapshot", "bad header");
  FileEntry current;
  bool in_entry = false;
  auto decode = [](std::string_view s) {
    auto d = util::percent_decode(s);
    if (!d) fail("MalformedSnapshot", "bad encoding");
    return *d;
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line == "entry") {
      current = FileEntry{};
      in_entry = true;
      continue;
    }
    if (line == "end") {
      store.guids_.insert(current.guid);
      store.entries_[current.lfn] = current;
      in_entry = false;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) fail("MalformedSnapshot", "bad line: " + line);
    std::string key = line.substr(0, eq);
    std::string value = decode(line.substr(eq + 1));
    if (!in_entry) {
      if (key == "dir") {
        store.dirs_.insert(value);
      } else if (key == "schema") {
        auto parts = util::split(value, '|');
        MetadataSchema schema;
        schema.dir = parts[0];
        for (std::size_t j = 1; j < parts.size(); ++j) {
          auto colon = parts[j].rfind(':');
          auto type = column_type_from(parts[j].substr(colon + 1));
          if (!type) fail("MalformedSnapshot", "bad column type");
          schema.columns[parts[j].substr(0, colon)] = *type;
        }
        store.schemas_[schema.dir] = schema;
      }
      continue;
    }
    if (key == "lfn") current.lfn = value;
    else if (key == "guid") current.guid = value;
    else if (key == "size") current.size = std::stoull(value);
    else if (key == "checksum") current.checksum = value;
    else if (key == "owner_vo") current.owner_vo = value;
    else if (key == "version") current.version = static_cast<std::uint32_t>(std::stoul(value));
    else if (key == "replica") {
      auto parts = util::split(value, '|');
      current.replicas.push_back({parts[0], parts[1]});
    } else if (key == "mirrored_from") {
      current.mirrored_from = value;
    } else if (key == "hist") {
      auto parts = util::split(value, '|');
      VersionRecord rec;
      std::uint32_t v = static_cast<std::uint32_t>(std::stoul(parts[0]));
      rec.size = std::stoull(parts[1]);
      rec.checksum = parts[2];
      for (std::size_t j = 3; j < parts.size(); ++j) {
        auto caret = parts[j].find('^');
        rec.replicas.push_back({parts[j].substr(0, caret), parts[j].substr(caret + 1)});
      }
      current.history[v] = rec;
    } else if (util::starts_with(key, "attr.")) {
      std::string name = key.substr(5);
      // Attribute types recover from the governing schema at query time;
      // snapshots keep the textual form.
      const MetadataSchema* schema = nullptr;
      for (const auto& [dir, s] : store.schemas_) {
        if (util::starts_with(current.lfn, dir + "/") || current.lfn == dir) schema = &s;
      }
      if (schema) {
        auto col = schema->columns.find(name);
        if (col != schema->columns.end()) {
          current.attrs[name] = parse_attr_value(col->second, value);
          continue;
        }
      }
      current.attrs[name] = value;
    }
  }
  return store;
}

}  // namespace mg::catalog
