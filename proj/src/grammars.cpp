#include <array>

#include "lap/errors.hpp"
#include "lap/scfg.hpp"

// Builtin six-domain grammars. Every domain covers two topics of discourse:
// reading a field of an object and setting a field of an object to a value
// or to another object's field. Objects recurse through field access, which
// is what produces depth-3 logical forms. Extension rules (G') add one new
// relation, one new entity, and one new set-field phrasing per domain.

namespace lap {

namespace {

struct DomainSpec {
  const char* name;
  // entity id (predicate) -> utterance word(s); single-word by construction
  std::array<const char*, 8> entities;
  std::array<const char*, 6> relations;        // predicate
  std::array<const char*, 6> relation_words;   // surface form
  const char* new_relation;
  const char* new_relation_word;
  const char* new_entity;
  const char* new_set_verb;   // distinct head word of the new set-field phrasing
  const char* new_set_link;   // linking word before the value
};

const DomainSpec kDomains[] = {
    {"person",
     {"john", "mary", "alice", "bob", "carol", "david", "emma", "frank"},
     {"friend", "parent", "child", "address", "phone", "email"},
     {"friends", "parents", "children", "address", "phone", "email"},
     "mentor", "mentor", "grace", "make", "equal to"},
    {"restaurant",
     {"bistro", "cafe", "diner", "pizzeria", "tavern", "grill", "bakery", "steakhouse"},
     {"menu", "location", "rating", "owner", "chef", "cuisine"},
     {"menu", "location", "rating", "owner", "chef", "cuisine"},
     "slogan", "slogan", "cantina", "update", "to"},
    {"event",
     {"meeting", "wedding", "concert", "workshop", "seminar", "gala", "parade", "auction"},
     {"date", "venue", "organizer", "duration", "budget", "theme"},
     {"date", "venue", "organizer", "duration", "budget", "theme"},
     "sponsor", "sponsor", "premiere", "switch", "to"},
    {"course",
     {"algebra", "biology", "chemistry", "history", "physics", "poetry", "robotics",
      "statistics"},
     {"instructor", "room", "schedule", "textbook", "capacity", "syllabus"},
     {"instructor", "room", "schedule", "textbook", "capacity", "syllabus"},
     "prerequisite", "prerequisite", "astronomy", "assign", "to"},
    {"animal",
     {"cat", "dog", "eagle", "horse", "lion", "panda", "rabbit", "tiger"},
     {"habitat", "diet", "lifespan", "weight", "speed", "sound"},
     {"habitat", "diet", "lifespan", "weight", "speed", "sound"},
     "predator", "predator", "walrus", "turn", "into"},
    {"vehicle",
     {"sedan", "truck", "scooter", "minivan", "roadster", "bus", "jeep", "tractor"},
     {"color", "mileage", "engine", "price", "fuel", "horsepower"},
     {"color", "mileage", "engine", "price", "fuel", "horsepower"},
     "warranty", "warranty", "snowplow", "swap", "for"},
};

std::string old_grammar_text(const DomainSpec& d) {
  std::string t;
  t += std::string("domain ") + d.name + "\n";
  t += "start QUERY\n";
  t += "q_get_poss: QUERY -> OBJ_2 's REL_1 | (field REL_1 OBJ_2)\n";
  t += "q_get_of:   QUERY -> REL_1 of OBJ_2 | (field REL_1 OBJ_2)\n";
  t += "q_get_the:  QUERY -> the REL_1 of OBJ_2 | (field REL_1 OBJ_2)\n";
  t += "q_set_to:   QUERY -> set the REL_1 of OBJ_2 to OBJ_3 | (setfield REL_1 OBJ_2 OBJ_3)\n";
  t += "q_set_chg:  QUERY -> change OBJ_2 's REL_1 to OBJ_3 | (setfield REL_1 OBJ_2 OBJ_3)\n";
  t += "o_poss: OBJ -> OBJ_2 's REL_1 | (field REL_1 OBJ_2)\n";
  t += "o_the:  OBJ -> the REL_1 of OBJ_2 | (field REL_1 OBJ_2)\n";
  for (size_t i = 0; i < d.entities.size(); ++i)
    t += "e_" + std::string(d.entities[i]) + ": OBJ -> " + d.entities[i] + " | " +
         d.entities[i] + "\n";
  for (size_t i = 0; i < d.relations.size(); ++i)
    t += "r_" + std::string(d.relations[i]) + ": REL -> " + d.relation_words[i] + " | " +
         d.relations[i] + "\n";
  return t;
}

std::string new_grammar_text(const DomainSpec& d) {
  std::string t;
  t += std::string("domain ") + d.name + "\n";
  t += "start QUERY\n";
  t += "n_rel: REL -> " + std::string(d.new_relation_word) + " | " + d.new_relation + "\n";
  t += "n_ent: OBJ -> " + std::string(d.new_entity) + " | " + d.new_entity + "\n";
  t += "n_set: QUERY -> " + std::string(d.new_set_verb) + " the REL_1 of OBJ_2 " +
       d.new_set_link + " OBJ_3 | (setfield REL_1 OBJ_2 OBJ_3)\n";
  return t;
}

}  // namespace

const std::vector<std::string>& builtin_domain_names() {
  static const std::vector<std::string> names = {"person", "restaurant", "event",
                                                 "course",  "animal",    "vehicle"};
  return names;
}

std::map<std::string, std::pair<Grammar, Grammar>> builtin_grammars() {
  std::map<std::string, std::pair<Grammar, Grammar>> out;
  for (const auto& d : kDomains) {
    Grammar g_old = load_grammar(old_grammar_text(d));
    Grammar g_new = load_grammar_extension(new_grammar_text(d), g_old);
    out.emplace(d.name, std::make_pair(std::move(g_old), std::move(g_new)));
  }
  return out;
}

Grammar sample_person_grammar() {
  static const char* text = R"(
domain person-sample
start QUERY
s_get_poss: QUERY -> OBJ_2 's REL_1 | (field REL_1 OBJ_2)
s_get_of:   QUERY -> REL_1 of OBJ_2 | (field REL_1 OBJ_2)
s_obj_poss: OBJ -> OBJ_2 's REL_1 | (field REL_1 OBJ_2)
s_john:  OBJ -> John | john
s_mary:  OBJ -> Mary | mary
s_alice: OBJ -> Alice | alice
s_friend: REL -> friends | friend
s_parent: REL -> parents | parent
s_child:  REL -> children | child
)";
  return load_grammar(text);
}

}  // namespace lap
