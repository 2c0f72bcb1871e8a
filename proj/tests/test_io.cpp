#include <doctest.h>

#include <sstream>

#include "scsa/io.hpp"
#include "scsa/rng.hpp"

using namespace scsa;

TEST_SUITE("io") {
    TEST_CASE("tensor dump layout: magic, rank, dtype, extents") {
        Tensor t(Shape{2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
        std::ostringstream os(std::ios::binary);
        save_tensor(os, t);
        const std::string bytes = os.str();
        REQUIRE(bytes.size() == 4 + 1 + 1 + 2 * 4 + 6 * 8);
        CHECK(bytes.substr(0, 4) == "SCST");
        CHECK(bytes[4] == 2);  // rank
        CHECK(bytes[5] == 0);  // f64
        // extents little-endian
        CHECK(static_cast<unsigned char>(bytes[6]) == 2);
        CHECK(static_cast<unsigned char>(bytes[10]) == 3);
    }

    TEST_CASE("f64 round trip is bit-exact") {
        Rng rng(77);
        Tensor t = Tensor::rand_uniform(Shape{2, 3, 4, 5}, rng);
        std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
        save_tensor(ss, t);
        auto lt = load_tensor(ss);
        CHECK(lt.stored_dtype == DType::F64);
        CHECK(lt.shape == t.shape);
        CHECK(lt.values.data == t.data);
    }

    TEST_CASE("f32 payloads load widened with the dtype recorded") {
        TensorF t(Shape{3}, {1.5f, -2.25f, 0.125f});
        std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
        save_tensor_f32(ss, t);
        auto lt = load_tensor(ss);
        CHECK(lt.stored_dtype == DType::F32);
        REQUIRE(lt.shape == Shape{3});
        CHECK(lt.values.data[0] == 1.5);
        CHECK(lt.values.data[1] == -2.25);
        CHECK(lt.values.data[2] == 0.125);
    }

    TEST_CASE("corrupt magic is rejected") {
        std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
        ss << "NOPEate more bytes here";
        CHECK_THROWS_AS(load_tensor(ss), IoError);
    }
}
