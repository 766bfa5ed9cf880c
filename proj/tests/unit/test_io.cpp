#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "sphere_mv/io.hpp"

using namespace sphere_mv;
using io::Json;

TEST_CASE("kernel JSON round-trips") {
  for (const char* text : {R"({"n":3,"family":"onsager"})", R"({"n":4,"family":"transformer","beta":2.5})",
                           R"({"n":3,"family":"opinion","p":5.0})", R"({"n":6,"family":"heat","epsilon":0.25})",
                           R"({"n":3,"family":"custom","profile":{"polynomial":[0.0,0.0,1.0]}})",
                           R"({"n":3,"family":"custom","profile":{"t":[-1.0,0.0,1.0],"g":[1.0,0.0,1.0],"interpolation":"linear"}})"}) {
    const auto spec = io::kernel_from_json(Json::parse(text));
    const auto again = io::kernel_from_json(io::kernel_to_json(spec));
    CHECK(io::kernel_to_json(again) == io::kernel_to_json(spec));
    CHECK(again.value(0.3) == spec.value(0.3));
  }
}

TEST_CASE("malformed kernels are rejected") {
  for (const char* text : {R"([1,2])", R"({"n":3})", R"({"family":"onsager"})", R"({"n":3,"family":"nope"})",
                           R"({"n":3,"family":"transformer"})", R"({"n":3,"family":"transformer","beta":"x"})",
                           R"({"n":2,"family":"onsager"})", R"({"n":3,"family":"custom"})",
                           R"({"n":3,"family":"custom","profile":{"t":[0,1],"g":[1,2],"interpolation":"cubic"}})"}) {
    CHECK_THROWS_AS(io::kernel_from_json(Json::parse(text)), std::invalid_argument);
  }
}

TEST_CASE("CSV output") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(-2.0) == "-2");
  CHECK(io::format_double(1.0 / 0.0) == "inf");
  io::Table t{{"k", "x", "tag"}, {{1LL, 0.5, std::string("a,b")}}};
  std::ostringstream out;
  io::write_csv(out, Json{{"seed", 3}}, t, Json{{"ok", true}});
  CHECK(out.str() == "# config: {\"seed\":3}\n# summary: {\"ok\":true}\nk,x,tag\n1,0.5,\"a,b\"\n");
  const auto j = io::table_json(Json{{"seed", 3}}, t);
  CHECK(j["rows"][0][1] == 0.5);
}
