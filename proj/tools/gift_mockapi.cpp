#include "gift/mockapi.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"gift-mockapi: fixture-driven face-compare server"};
  int port = 8080;
  std::string fixture;
  app.add_option("--port", port, "Port to listen on");
  app.add_option("--fixture", fixture, "Fixture rules JSON file");
  CLI11_PARSE(app, argc, argv);

  try {
    gift::MockApiServer server =
        fixture.empty() ? gift::MockApiServer("{}")
                        : gift::MockApiServer::fromFixtureFile(fixture);
    std::cerr << "listening on port " << port << "\n";
    server.startOn(port);  // blocks until the process is stopped
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
