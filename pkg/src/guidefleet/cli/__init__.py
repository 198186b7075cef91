"""Command-line front doors: fleetd (server), fleetsim (harness), fleetctl (client)."""
